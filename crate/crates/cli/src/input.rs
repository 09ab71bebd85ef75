use std::io::Read;
use std::ops::RangeInclusive;

use shortar::calibration::N_RANGE;

use crate::error::{CliError, CliResult};

/// Parses a series length inside the supported range.
pub fn parse_n(s: &str) -> Result<usize, String> {
    let n: usize = s.trim().parse().map_err(|_| format!("'{s}' is not a series length"))?;
    if !N_RANGE.contains(&n) {
        return Err(format!(
            "n = {n} is outside [{}, {}]",
            N_RANGE.start(),
            N_RANGE.end()
        ));
    }
    Ok(n)
}

/// `15` or an inclusive range `10:50`.
pub fn parse_n_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    match s.split_once(':') {
        None => parse_n(s).map(|n| n..=n),
        Some((a, b)) => {
            let (a, b) = (parse_n(a)?, parse_n(b)?);
            if a > b {
                return Err(format!("empty range {a}:{b}"));
            }
            Ok(a..=b)
        }
    }
}

pub fn parse_order(s: &str) -> Result<usize, String> {
    match s.trim() {
        "1" => Ok(1),
        "2" => Ok(2),
        other => Err(format!("order must be 1 or 2, got '{other}'")),
    }
}

fn is_missing(field: &str) -> bool {
    matches!(
        field.trim().to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "null" | "none" | "-"
    )
}

/// Reads one numeric column. A first row whose selected field is not a
/// number is taken as a header; `column` selects by header name.
pub fn read_series<R: Read>(mut reader: R, column: Option<&str>) -> CliResult<Vec<f64>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let lines: Vec<&str> = text.lines().collect();
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    if let Some(last) = last {
        if let Some(i) = lines[..last].iter().position(|l| l.trim().is_empty()) {
            return Err(CliError::Usage(format!("missing value at row {}", i + 1)));
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = rdr.records();
    let first = match rows.next() {
        Some(r) => r?,
        None => return Err(CliError::Usage("input contains no rows".into())),
    };

    let header = first.iter().any(|f| !f.is_empty() && f.parse::<f64>().is_err() && !is_missing(f));
    let idx = match column {
        Some(name) => {
            if !header {
                return Err(CliError::Usage(format!(
                    "--column {name} given but the input has no header row"
                )));
            }
            first.iter().position(|f| f == name).ok_or_else(|| {
                CliError::Usage(format!(
                    "column '{name}' not found (header: {})",
                    first.iter().collect::<Vec<_>>().join(", ")
                ))
            })?
        }
        None if first.len() == 1 => 0,
        None => {
            return Err(CliError::Usage(format!(
                "input has {} columns; choose one with --column",
                first.len()
            )))
        }
    };

    let mut values = Vec::new();
    let mut take = |rec: &csv::StringRecord, row: u64| -> CliResult {
        let field = rec.get(idx).unwrap_or("");
        if is_missing(field) {
            return Err(CliError::Usage(format!("missing value at row {row}")));
        }
        let v: f64 = field
            .parse()
            .map_err(|_| CliError::Usage(format!("row {row}: '{field}' is not a number")))?;
        if !v.is_finite() {
            return Err(CliError::Usage(format!("missing value at row {row}")));
        }
        values.push(v);
        Ok(())
    };
    if !header {
        take(&first, 1)?;
    }
    for rec in rows {
        let rec = rec?;
        let row = rec.position().map_or(0, |p| p.line());
        take(&rec, row)?;
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn written_series_read_back_exactly(
            values in prop::collection::vec(-1e6f64..1e6, 1..60),
            header in any::<bool>(),
        ) {
            let mut text = if header { "value\n".to_string() } else { String::new() };
            for v in &values {
                text.push_str(&format!("{v}\n"));
            }
            prop_assert_eq!(read_series(text.as_bytes(), None).unwrap(), values);
        }

        #[test]
        fn ranges_inside_bounds_parse(a in 10usize..=50, b in 10usize..=50) {
            let r = parse_n_range(&format!("{a}:{b}"));
            prop_assert_eq!(r.is_ok(), a <= b);
            if let Ok(r) = r {
                prop_assert_eq!((*r.start(), *r.end()), (a, b));
            }
        }
    }

    #[test]
    fn single_column_with_and_without_header() {
        assert_eq!(read_series("1\n2.5\n-3\n".as_bytes(), None).unwrap(), vec![1.0, 2.5, -3.0]);
        assert_eq!(read_series("x\n1\n2\n".as_bytes(), None).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn named_column() {
        let data = "t,y\n1,0.5\n2,0.25\n";
        assert_eq!(read_series(data.as_bytes(), Some("y")).unwrap(), vec![0.5, 0.25]);
        assert!(matches!(read_series(data.as_bytes(), None), Err(CliError::Usage(_))));
        assert!(matches!(read_series(data.as_bytes(), Some("z")), Err(CliError::Usage(_))));
        assert!(matches!(read_series("1,2\n".as_bytes(), Some("y")), Err(CliError::Usage(_))));
    }

    #[test]
    fn missing_values_report_their_row() {
        let err = read_series("x\n1\n\n3\n".as_bytes(), None).unwrap_err();
        assert_eq!(err.to_string(), "missing value at row 3");
        assert!(read_series("1\n2\n\n".as_bytes(), None).is_ok());
        let err = read_series("x\n1\nNA\n3\n".as_bytes(), None).unwrap_err();
        assert_eq!(err.to_string(), "missing value at row 3");
        let err = read_series("t,y\n1,2\n2,\n".as_bytes(), Some("y")).unwrap_err();
        assert_eq!(err.to_string(), "missing value at row 3");
        let err = read_series("1\n2\nabc\n".as_bytes(), None).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_n_range("15").unwrap(), 15..=15);
        assert_eq!(parse_n_range("10:50").unwrap(), 10..=50);
        assert!(parse_n_range("9:20").is_err());
        assert!(parse_n_range("30:20").is_err());
        assert!(parse_n("51").is_err());
        assert!(parse_order("3").is_err());
    }
}

//! CSV parsing for location sets and threshold matrices.
//!
//! Both formats carry a header row of names followed by numeric rows:
//! locations are one row per point (columns = coordinates), thresholds are
//! one row per component (columns = locations, `inf` allowed).

use super::{CoreError, LocationSet, ThresholdMatrix};

fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>, CoreError> {
    let mut rows = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if lineno == 0 {
            continue; // header row: names only
        }
        let row = line
            .split(',')
            .map(|field| {
                let field = field.trim();
                field.parse::<f64>().map_err(|_| CoreError::Csv {
                    line: lineno + 1,
                    msg: format!("cannot parse '{field}' as a number"),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if let Some(w) = width {
            if row.len() != w {
                return Err(CoreError::Csv {
                    line: lineno + 1,
                    msg: format!("expected {w} columns, found {}", row.len()),
                });
            }
        } else {
            width = Some(row.len());
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CoreError::Csv {
            line: 1,
            msg: "no data rows".into(),
        });
    }
    Ok(rows)
}

/// One row per location, columns are the p coordinates.
pub fn parse_locations_csv(text: &str) -> Result<LocationSet, CoreError> {
    LocationSet::new(parse_rows(text)?)
}

/// One row per component, columns are the n locations; `inf` means no
/// constraint at that entry.
pub fn parse_thresholds_csv(text: &str) -> Result<ThresholdMatrix, CoreError> {
    let rows = parse_rows(text)?;
    let d = rows.len();
    let n = rows[0].len();
    // rows are component-major; repack location-major
    let mut entries = vec![0.0; d * n];
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            entries[j * d + i] = v;
        }
    }
    ThresholdMatrix::new(d, n, entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locations_roundtrip() {
        let locs = parse_locations_csv("x1\n0.0\n1.5\n-2.0\n").unwrap();
        assert_eq!(locs.n(), 3);
        assert_eq!(locs.p(), 1);
        assert_eq!(locs.point(2), &[-2.0]);
    }

    #[test]
    fn thresholds_with_infinity() {
        let x = parse_thresholds_csv("t1,t2\n1.0,inf\n2.0,3.0\n").unwrap();
        assert_eq!((x.d(), x.n()), (2, 2));
        assert_eq!(x.get(0, 1), f64::INFINITY);
        assert_eq!(x.get(1, 1), 3.0);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(parse_locations_csv("x1,x2\n1.0,2.0\n3.0\n").is_err());
    }

    #[test]
    fn bad_number_reports_line() {
        let err = parse_locations_csv("x1\n1.0\nabc\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}

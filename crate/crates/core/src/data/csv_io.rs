use std::io::Read;
use std::path::Path;

use super::{DataError, Dataset, Result};

/// Which CSV column holds the label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
    Name(String),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// `last`, a zero-based column index, or a header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(if s.eq_ignore_ascii_case("last") {
            LabelColumn::Last
        } else if let Ok(i) = s.parse() {
            LabelColumn::Index(i)
        } else {
            LabelColumn::Name(s.to_string())
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub label_column: LabelColumn,
    pub has_header: bool,
}

pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, options)
}

/// Parses comma-separated numeric rows. Row numbers in errors are 1-based
/// file lines; column numbers are 1-based fields.
pub fn read_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header: Option<Vec<String>> = if options.has_header {
        let h = rdr.headers().map_err(|e| parse_error(&e, 1, 0))?;
        Some(h.iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut width: Option<usize> = header.as_ref().map(Vec::len);
    let mut cells: Vec<Vec<f64>> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 1 + usize::from(options.has_header);
        let record = record.map_err(|e| parse_error(&e, line, 0))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(DataError::Parse {
                    row: line,
                    column: record.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", record.len()),
                })
            }
            Some(_) => {}
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DataError::Parse {
                        row: line,
                        column: j + 1,
                        message: format!("not a finite number: {cell:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        cells.push(row);
    }

    let width = match width {
        Some(w) if !cells.is_empty() => w,
        _ => {
            return Err(DataError::Parse {
                row: 1,
                column: 1,
                message: "no data rows".to_string(),
            })
        }
    };
    if width < 2 {
        return Err(DataError::Invalid(
            "need at least one attribute column besides the label".to_string(),
        ));
    }

    let label_idx = match &options.label_column {
        LabelColumn::Last => width - 1,
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => {
            return Err(DataError::Invalid(format!(
                "label column {i} out of range for {width} columns"
            )))
        }
        LabelColumn::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| DataError::Invalid(format!("no column named {name:?}")))?,
    };

    let mut attributes = Vec::with_capacity(cells.len() * (width - 1));
    let mut labels = Vec::with_capacity(cells.len());
    for row in &cells {
        for (j, &v) in row.iter().enumerate() {
            if j == label_idx {
                labels.push(v);
            } else {
                attributes.push(v);
            }
        }
    }
    let ds = Dataset::new(attributes, labels, width - 1)?;
    Ok(match header {
        Some(mut h) => {
            h.remove(label_idx);
            ds.with_column_names(h)
        }
        None => ds,
    })
}

fn parse_error(e: &csv::Error, row: usize, column: usize) -> DataError {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(row);
    DataError::Parse {
        row,
        column,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, options: &CsvOptions) -> Result<Dataset> {
        read_csv(text.as_bytes(), options)
    }

    #[test]
    fn last_column_is_label() {
        let ds = parse("1,2,3\n4,5,6\n7,8,9\n", &CsvOptions::default()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.n_attributes(), 2);
        assert_eq!(ds.labels(), &[3.0, 6.0, 9.0]);
        assert_eq!(ds.row(1), &[4.0, 5.0]);
    }

    #[test]
    fn empty_file_is_error() {
        assert!(matches!(
            parse("", &CsvOptions::default()),
            Err(DataError::Parse { .. })
        ));
    }

    #[test]
    fn header_and_named_label() {
        let opts = CsvOptions {
            label_column: LabelColumn::Name("y".into()),
            has_header: true,
        };
        let ds = parse("y,a,b\n1,2,3\n4,5,6\n", &opts).unwrap();
        assert_eq!(ds.labels(), &[1.0, 4.0]);
        assert_eq!(ds.row(0), &[2.0, 3.0]);
        assert_eq!(
            ds.column_names().unwrap(),
            &["a".to_string(), "b".to_string()]
        );
    }

    #[test]
    fn non_numeric_cell_located() {
        let err = parse("1,2\n3,x\n", &CsvOptions::default()).unwrap_err();
        match err {
            DataError::Parse { row, column, .. } => assert_eq!((row, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_row_located() {
        let err = parse("1,2,3\n4,5\n", &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, DataError::Parse { row: 2, .. }));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_csv("/nonexistent/abalone.csv", &CsvOptions::default()).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/abalone.csv"));
    }

    #[test]
    fn label_column_from_str() {
        assert_eq!("last".parse::<LabelColumn>().unwrap(), LabelColumn::Last);
        assert_eq!("0".parse::<LabelColumn>().unwrap(), LabelColumn::Index(0));
        assert_eq!(
            "rings".parse::<LabelColumn>().unwrap(),
            LabelColumn::Name("rings".into())
        );
    }
}

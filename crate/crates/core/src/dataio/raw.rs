use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::FeatureSchema;

/// Delimited numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    columns: Vec<String>,
    index: HashMap<String, usize>,
    rows: Vec<Vec<f64>>,
}

impl RawTable {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let index = columns
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect::<HashMap<_, _>>();
        if index.len() != columns.len() {
            return Err(Error::Ingestion {
                row: 0,
                column: String::new(),
                message: "duplicate column names in header".into(),
            });
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::Ingestion {
                    row: r + 1,
                    column: columns.get(row.len()).cloned().unwrap_or_default(),
                    message: format!("expected {} values, found {}", columns.len(), row.len()),
                });
            }
        }
        Ok(Self {
            columns,
            index,
            rows,
        })
    }

    /// Parses delimited text. With `delimiter = None` the header line picks
    /// tab if it contains one, comma otherwise.
    pub fn parse(text: &str, delimiter: Option<char>) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Ingestion {
            row: 0,
            column: String::new(),
            message: "missing header row".into(),
        })?;
        let delim = delimiter.unwrap_or(if header.contains('\t') { '\t' } else { ',' });
        let columns: Vec<String> = header
            .split(delim)
            .map(|c| c.trim().trim_matches('"').to_string())
            .collect();
        let mut rows = Vec::new();
        for (r, line) in lines.enumerate() {
            let mut row = Vec::with_capacity(columns.len());
            for (c, cell) in line.split(delim).enumerate() {
                let name = columns.get(c).cloned().unwrap_or_else(|| format!("#{}", c + 1));
                let cell = cell.trim();
                let v: f64 = cell.parse().map_err(|_| Error::Ingestion {
                    row: r + 1,
                    column: name.clone(),
                    message: format!("cannot parse `{cell}` as a number"),
                })?;
                row.push(v);
            }
            rows.push(row);
        }
        Self::new(columns, rows)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Checks that every column the schema needs is present (accepting a
    /// feature's aliases) and returns their indices in schema order:
    /// features, then availability flags, then the choice column.
    pub fn resolve(&self, schema: &FeatureSchema) -> Result<ResolvedColumns> {
        let missing = |name: &str| Error::Ingestion {
            row: 0,
            column: name.to_string(),
            message: "required column missing from header".into(),
        };
        let mut features = Vec::new();
        for f in &schema.features {
            let idx = std::iter::once(&f.column)
                .chain(&f.aliases)
                .find_map(|c| self.column_index(c))
                .ok_or_else(|| missing(&f.column))?;
            features.push(idx);
        }
        let availability = schema
            .availability_columns
            .iter()
            .map(|c| self.column_index(c).ok_or_else(|| missing(c)))
            .collect::<Result<Vec<_>>>()?;
        let choice = self
            .column_index(&schema.choice_column)
            .ok_or_else(|| missing(&schema.choice_column))?;
        let respondent = schema
            .respondent_column
            .as_deref()
            .and_then(|c| self.column_index(c));
        Ok(ResolvedColumns {
            features,
            availability,
            choice,
            respondent,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedColumns {
    pub features: Vec<usize>,
    pub availability: Vec<usize>,
    pub choice: usize,
    pub respondent: Option<usize>,
}

/// Reads a delimited file and checks it carries every column of `schema`.
pub fn load_raw(path: &Path, delimiter: Option<char>, schema: &FeatureSchema) -> Result<RawTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let table = RawTable::parse(&text, delimiter)?;
    table.resolve(schema)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const HEADER: &str = "ID\tGROUP\tPURPOSE\tFIRST\tLUGGAGE\tAGE\tMALE\tINCOME\tGA\tTRAIN_AV\tCAR_AV\tSM_AV\tTRAIN_TT\tTRAIN_CO\tTRAIN_HE\tSM_TT\tSM_CO\tSM_HE\tSM_SEATS\tCAR_TT\tCAR_CO\tCHOICE";

    fn three_rows() -> String {
        format!(
            "{HEADER}\n\
             1\t2\t1\t0\t0\t3\t0\t2\t0\t1\t1\t1\t112\t48\t120\t63\t52\t20\t0\t117\t65\t2\n\
             1\t2\t1\t0\t0\t3\t0\t2\t0\t1\t1\t1\t103\t48\t30\t60\t49\t10\t0\t117\t84\t2\n\
             2\t3\t3\t1\t1\t2\t1\t3\t0\t1\t0\t1\t130\t48\t60\t67\t58\t30\t1\t0\t0\t1\n"
        )
    }

    #[test]
    fn well_formed_file_loads_all_rows() {
        let t = RawTable::parse(&three_rows(), None).unwrap();
        assert_eq!(t.len(), 3);
        t.resolve(&FeatureSchema::swissmetro()).unwrap();
        assert_eq!(t.column("CAR_AV").unwrap(), vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn comma_delimiter_detected() {
        let text = three_rows().replace('\t', ",");
        let t = RawTable::parse(&text, None).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.columns().len(), 22);
    }

    #[test]
    fn missing_availability_column_is_ingestion_error() {
        let text = three_rows().replace("CAR_AV", "CAR_AVX");
        let t = RawTable::parse(&text, None).unwrap();
        let err = t.resolve(&FeatureSchema::swissmetro()).unwrap_err();
        match err {
            Error::Ingestion { column, .. } => assert_eq!(column, "CAR_AV"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unparseable_cell_names_row_and_column() {
        let text = three_rows().replacen("\t112\t", "\tabc\t", 1);
        let err = RawTable::parse(&text, None).unwrap_err();
        match err {
            Error::Ingestion { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "TRAIN_TT");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn short_row_rejected() {
        let text = format!("{HEADER}\n1\t2\t3\n");
        assert!(matches!(
            RawTable::parse(&text, None),
            Err(Error::Ingestion { row: 1, .. })
        ));
    }
}

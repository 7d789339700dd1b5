//! Inputs for audience forecasting.
//!
//! Precision table, one row per source tag:
//!
//! ```text
//! category,precision
//! sports-fan,0.42
//! ```
//!
//! Tagged users, source tags separated by `;` (an empty cell is an
//! untagged user):
//!
//! ```text
//! user_id,tags
//! u1,sports-fan;outdoor
//! ```

use std::path::Path;

use super::{csv_error, read_to_string, FileError};
use crate::econ::PrecisionTable;
use crate::scalar::Scalar;

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

fn check_header(r: &mut csv::Reader<&[u8]>, expected: [&str; 2]) -> Result<(), FileError> {
    let header = r.headers().map_err(|e| csv_error(e, "header"))?;
    if header.iter().ne(expected) {
        return Err(FileError::Parse {
            line: 1,
            field: "header".into(),
            message: format!("expected `{}`", expected.join(",")),
        });
    }
    Ok(())
}

pub fn parse_precision_table<T: Scalar>(text: &str) -> Result<PrecisionTable<T>, FileError> {
    let mut r = reader(text);
    check_header(&mut r, ["category", "precision"])?;
    let mut entries = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(e, "record"))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let p: f64 = rec[1].parse().map_err(|e| FileError::Parse {
            line,
            field: "precision".into(),
            message: format!("`{}`: {e}", &rec[1]),
        })?;
        entries.push((rec[0].to_owned(), T::lit(p)));
    }
    PrecisionTable::new(entries).map_err(|e| FileError::Parse {
        line: 0,
        field: "precision".into(),
        message: e.to_string(),
    })
}

pub fn parse_tagged_users(text: &str) -> Result<Vec<Vec<String>>, FileError> {
    let mut r = reader(text);
    check_header(&mut r, ["user_id", "tags"])?;
    let mut users = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(e, "record"))?;
        let tags = rec[1]
            .split(';')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::to_owned)
            .collect();
        users.push(tags);
    }
    Ok(users)
}

pub fn load_precision_table<T: Scalar>(path: &Path) -> Result<PrecisionTable<T>, FileError> {
    parse_precision_table(&read_to_string(path)?)
}

pub fn load_tagged_users(path: &Path) -> Result<Vec<Vec<String>>, FileError> {
    parse_tagged_users(&read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_and_users() {
        let t: PrecisionTable<f64> = parse_precision_table("category,precision\na,0.5\nb, 0.25\n").unwrap();
        assert_eq!(t.get("b"), Some(0.25));
        let users = parse_tagged_users("user_id,tags\nu1,a;b\nu2,\nu3, a \n").unwrap();
        assert_eq!(users, vec![vec!["a".to_owned(), "b".into()], vec![], vec!["a".into()]]);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(parse_precision_table::<f64>("category,precision\na,high\n").is_err());
        assert!(parse_precision_table::<f64>("category,precision\na,1.5\n").is_err());
        assert!(parse_precision_table::<f64>("cat,p\na,0.5\n").is_err());
        assert!(parse_tagged_users("user,tags\n").is_err());
    }
}

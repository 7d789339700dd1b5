//! Campaign table: comma-separated, one (campaign, source) pair per line.
//!
//! ```text
//! campaign_id,source_id,population,d_plus,d_minus,g_plus,g_minus
//! site-01,acme,1000,310,420,280,610
//! ```
//!
//! Unknown counts are never read; they are completed to `population`.
//! Fields may be padded with whitespace.

use std::collections::BTreeMap;
use std::path::Path;

use super::{csv_error, read_to_string, FileError};
use crate::domain::{validate_aggregate, CampaignAggregate, RawCampaign, SourceId};

pub const COLUMNS: [&str; 7] = [
    "campaign_id",
    "source_id",
    "population",
    "d_plus",
    "d_minus",
    "g_plus",
    "g_minus",
];

pub type CampaignsBySource = BTreeMap<SourceId, Vec<CampaignAggregate<u64>>>;

pub fn parse_campaign_file(path: &Path) -> Result<CampaignsBySource, FileError> {
    parse_campaigns(&read_to_string(path)?)
}

/// Parses campaign records, grouping them by source in file order.
pub fn parse_campaigns(text: &str) -> Result<CampaignsBySource, FileError> {
    let mut out = CampaignsBySource::new();
    if text.trim().is_empty() {
        return Ok(out);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());

    let header = reader.headers().map_err(|e| csv_error(e, "header"))?.clone();
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(FileError::Parse {
            line: 1,
            field: "header".into(),
            message: format!("expected `{}`", COLUMNS.join(",")),
        });
    }

    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, "record"))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let int = |i: usize| -> Result<i64, FileError> {
            record[i].parse::<i64>().map_err(|e| FileError::Parse {
                line,
                field: COLUMNS[i].into(),
                message: format!("`{}`: {e}", &record[i]),
            })
        };
        let text_field = |i: usize| -> Result<String, FileError> {
            if record[i].is_empty() {
                Err(FileError::Parse {
                    line,
                    field: COLUMNS[i].into(),
                    message: "empty identifier".into(),
                })
            } else {
                Ok(record[i].to_owned())
            }
        };
        let raw = RawCampaign {
            id: text_field(0)?.into(),
            population: int(2)?,
            d_plus: int(3)?,
            d_minus: int(4)?,
            g_plus: int(5)?,
            g_minus: int(6)?,
        };
        let source = SourceId(text_field(1)?);
        let agg = validate_aggregate(&raw).map_err(|cause| FileError::Validation { line, cause })?;
        out.entry(source).or_default().push(agg);
    }
    Ok(out)
}

/// Renders campaigns in the format [`parse_campaigns`] reads.
pub fn format_campaigns(campaigns: &CampaignsBySource) -> String {
    let mut s = COLUMNS.join(",");
    s.push('\n');
    for (source, aggs) in campaigns {
        for a in aggs {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                a.id, source, a.population, a.source.positive, a.source.negative, a.truth.positive, a.truth.negative
            ));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DomainError, TagCounts};

    const THREE: &str = "\
campaign_id,source_id,population,d_plus,d_minus,g_plus,g_minus
c1,acme,100,40,30,50,40
c2,acme,100,20,50,38,50
c3, acme ,100,30,25,47,41
";

    #[test]
    fn well_formed_file() {
        let parsed = parse_campaigns(THREE).unwrap();
        let acme = &parsed[&SourceId::from("acme")];
        assert_eq!(acme.len(), 3);
        assert_eq!(acme[0].source, TagCounts::new(40, 30, 30));
        assert_eq!(acme[0].truth, TagCounts::new(50, 40, 10));
        assert_eq!(acme[2].id.0, "c3");
    }

    #[test]
    fn empty_file_is_empty_list() {
        assert!(parse_campaigns("").unwrap().is_empty());
        assert!(parse_campaigns(&format!("{}\n", COLUMNS.join(","))).unwrap().is_empty());
    }

    #[test]
    fn validation_error_carries_line() {
        let text = format!("{THREE}c4,acme,100,60,50,10,10\n");
        match parse_campaigns(&text) {
            Err(FileError::Validation { line, cause }) => {
                assert_eq!(line, 5);
                assert!(matches!(cause, DomainError::CountsExceedPopulation { .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_error_names_field() {
        let text = "campaign_id,source_id,population,d_plus,d_minus,g_plus,g_minus\nc1,s,100,x,1,1,1\n";
        match parse_campaigns(text) {
            Err(FileError::Parse { line, field, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "d_plus");
            }
            other => panic!("{other:?}"),
        }
        let short = "campaign_id,source_id,population,d_plus,d_minus,g_plus,g_minus\nc1,s,100\n";
        assert!(matches!(parse_campaigns(short), Err(FileError::Parse { line: 2, .. })));
        assert!(matches!(
            parse_campaigns("a,b\n1,2\n"),
            Err(FileError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn format_then_parse_round_trips() {
        let parsed = parse_campaigns(THREE).unwrap();
        assert_eq!(parse_campaigns(&format_campaigns(&parsed)).unwrap(), parsed);
    }

    #[test]
    fn reads_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, THREE).unwrap();
        assert_eq!(parse_campaign_file(&path).unwrap().len(), 1);
        assert!(matches!(
            parse_campaign_file(&dir.path().join("missing.csv")),
            Err(FileError::Io { .. })
        ));
    }
}

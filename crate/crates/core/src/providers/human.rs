//! Imports human ratings from a delimited file: header row, columns
//! item_id, annotator_id, attribute_id, value. One rating per row; humans
//! are not sampled, so every cell sits at sample slot 0.

use std::collections::BTreeSet;
use std::path::Path;

use crate::providers::ProviderError;
use crate::types::{
    AnnotatorKind, AnnotatorRef, Cell, CellKey, Rating, RatingMatrix, RatingValue, TaskSpec,
};

pub fn import_human_ratings(path: &Path, task: &TaskSpec) -> Result<RatingMatrix, ProviderError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ProviderError::Io(format!("{}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| format_error(path, 1, e.to_string()))?
        .clone();
    let column = |name: &str| -> Result<usize, ProviderError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format_error(path, 1, format!("missing column {name}")))
    };
    let item_col = column("item_id")?;
    let annot_col = column("annotator_id")?;
    let attr_col = column("attribute_id")?;
    let value_col = column("value")?;

    let mut matrix = RatingMatrix::new(&task.id);
    let mut annotators = BTreeSet::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let record = record.map_err(|e| format_error(path, line, e.to_string()))?;
        let field = |col: usize, name: &str| -> Result<String, ProviderError> {
            record
                .get(col)
                .filter(|v| !v.is_empty())
                .map(|v| v.to_string())
                .ok_or_else(|| format_error(path, line, format!("empty {name}")))
        };
        let item_id = field(item_col, "item_id")?;
        let annotator_id = field(annot_col, "annotator_id")?;
        let attribute_id = field(attr_col, "attribute_id")?;
        let raw_value = field(value_col, "value")?;

        let attribute = task.attribute(&attribute_id).ok_or_else(|| {
            format_error(path, line, format!("unknown attribute {attribute_id}"))
        })?;
        let value: RatingValue = raw_value
            .parse()
            .map_err(|_| format_error(path, line, format!("unreadable value {raw_value}")))?;
        if !attribute.scale.contains(value) {
            return Err(ProviderError::Scale {
                path: path.display().to_string(),
                line,
                value: raw_value,
            });
        }

        annotators.insert(annotator_id.clone());
        matrix.insert(
            CellKey {
                item_id,
                annotator_id: annotator_id.clone(),
                attribute_id,
                sample_index: 0,
            },
            Cell::Rated {
                rating: Rating {
                    value,
                    annotator_id,
                    sample_index: 0,
                    raw_response_ref: None,
                    parse_trace: vec![],
                },
                retry_count: 0,
            },
        );
    }

    for id in annotators {
        matrix.add_roster_entry(AnnotatorRef {
            id,
            kind: AnnotatorKind::Human,
            samples_per_question: 1,
        });
    }
    Ok(matrix)
}

fn format_error(path: &Path, line: usize, message: String) -> ProviderError {
    ProviderError::Format {
        path: path.display().to_string(),
        line,
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::builtin_story_task;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(content.as_bytes()).unwrap();
        file
    }

    #[test]
    fn three_teachers_two_items_four_attributes() {
        let mut content = String::from("item_id,annotator_id,attribute_id,value\n");
        for item in ["i1", "i2"] {
            for teacher in ["t1", "t2", "t3"] {
                for attr in ["grammaticality", "cohesiveness", "likability", "relevance"] {
                    content.push_str(&format!("{item},{teacher},{attr},4\n"));
                }
            }
        }
        let file = write_csv(&content);
        let matrix = import_human_ratings(file.path(), &builtin_story_task()).unwrap();
        assert_eq!(matrix.len(), 24);
        assert_eq!(matrix.annotator_roster.len(), 3);
        assert!(matrix
            .annotator_roster
            .iter()
            .all(|a| a.kind == AnnotatorKind::Human && a.samples_per_question == 1));
    }

    #[test]
    fn header_only_file_is_empty_matrix() {
        let file = write_csv("item_id,annotator_id,attribute_id,value\n");
        let matrix = import_human_ratings(file.path(), &builtin_story_task()).unwrap();
        assert!(matrix.is_empty());
    }

    #[test]
    fn half_point_values_accepted() {
        let file = write_csv("item_id,annotator_id,attribute_id,value\ni1,t1,grammaticality,3.5\n");
        let matrix = import_human_ratings(file.path(), &builtin_story_task()).unwrap();
        assert_eq!(
            matrix.rated_values("i1", "t1", "grammaticality"),
            vec![RatingValue::new(7, 2)]
        );
    }

    #[test]
    fn off_grid_value_reports_line() {
        let file = write_csv("item_id,annotator_id,attribute_id,value\ni1,t1,grammaticality,4\ni2,t1,grammaticality,6\n");
        let err = import_human_ratings(file.path(), &builtin_story_task()).unwrap_err();
        match err {
            ProviderError::Scale { line, value, .. } => {
                assert_eq!(line, 3);
                assert_eq!(value, "6");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let file = write_csv("item_id,annotator_id,attribute_id,value\ni1,t1,grammaticality,\n");
        let err = import_human_ratings(file.path(), &builtin_story_task()).unwrap_err();
        assert!(matches!(err, ProviderError::Format { line: 2, .. }));
    }
}

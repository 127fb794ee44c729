use ndarray::Array2;

use crate::error::{Error, Result};

/// One binary column per vocabulary entry; each row has exactly one 1.
pub fn one_hot_encode<S: AsRef<str>>(column: &str, values: &[S], vocabulary: &[String]) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((values.len(), vocabulary.len()));
    for (i, v) in values.iter().enumerate() {
        let j = category_index(column, v.as_ref(), vocabulary)?;
        out[[i, j]] = 1.0;
    }
    Ok(out)
}

pub(crate) fn category_index(column: &str, value: &str, vocabulary: &[String]) -> Result<usize> {
    vocabulary
        .iter()
        .position(|c| c == value)
        .ok_or_else(|| Error::OutOfVocabulary {
            column: column.to_string(),
            value: value.to_string(),
        })
}

//! Word embedding table and its text interchange format:
//!
//! ```text
//! <vocab_size> <embed_dim>
//! <token> <v1> ... <vD>
//! ```

use std::io::{BufRead, Write};

use crate::numerics::Matrix;

use super::{TextError, Vocab};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    /// `vocab_size × embed_dim`
    pub matrix: Matrix,
    pub trainable: bool,
}

impl EmbeddingTable {
    pub fn new(matrix: Matrix) -> Self {
        Self {
            matrix,
            trainable: true,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.matrix.rows()
    }

    pub fn embed_dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn row(&self, id: usize) -> &[f64] {
        self.matrix.row(id)
    }

    pub fn write_text<W: Write>(&self, vocab: &Vocab, mut out: W) -> Result<(), TextError> {
        if vocab.len() != self.vocab_size() {
            return Err(TextError::InvalidVocab(format!(
                "table has {} rows but vocab has {} tokens",
                self.vocab_size(),
                vocab.len()
            )));
        }
        writeln!(out, "{} {}", self.vocab_size(), self.embed_dim())?;
        for (id, tok) in vocab.tokens().iter().enumerate() {
            write!(out, "{tok}")?;
            for v in self.row(id) {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Reads the text format and places each row at its token's id in
    /// `vocab`. Tokens absent from `vocab` are ignored; vocab entries absent
    /// from the file keep zero rows. Returns the table and the number of
    /// vocab tokens that were not found in the file.
    pub fn read_text<R: BufRead>(input: R, vocab: &Vocab) -> Result<(Self, usize), TextError> {
        let rows = read_rows(input)?;
        let dim = rows.dim;
        let mut matrix = Matrix::zeros(vocab.len(), dim);
        let mut found = vec![false; vocab.len()];
        for (tok, values) in rows.rows {
            if !vocab.contains(&tok) {
                continue;
            }
            let id = vocab.id(&tok);
            matrix.row_mut(id).copy_from_slice(&values);
            found[id] = true;
        }
        let missing = found.iter().filter(|f| !**f).count();
        Ok((Self::new(matrix), missing))
    }
}

struct TextRows {
    dim: usize,
    rows: Vec<(String, Vec<f64>)>,
}

fn read_rows<R: BufRead>(input: R) -> Result<TextRows, TextError> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| TextError::Parse { line: 1, msg: "missing header".into() })??;
    let mut parts = header.split_whitespace();
    let parse_usize = |s: Option<&str>, what: &str| -> Result<usize, TextError> {
        s.and_then(|v| v.parse().ok()).ok_or_else(|| TextError::Parse {
            line: 1,
            msg: format!("bad {what} in header"),
        })
    };
    let count = parse_usize(parts.next(), "vocab_size")?;
    let dim = parse_usize(parts.next(), "embed_dim")?;

    let mut rows = Vec::with_capacity(count);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let tok = fields.next().unwrap_or_default().to_string();
        let values = fields
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| TextError::Parse { line: line_no, msg: e.to_string() })?;
        if values.len() != dim {
            return Err(TextError::Parse {
                line: line_no,
                msg: format!("expected {dim} values, found {}", values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TextError::Parse { line: line_no, msg: "non-finite value".into() });
        }
        rows.push((tok, values));
    }
    if rows.len() != count {
        return Err(TextError::Parse {
            line: rows.len() + 1,
            msg: format!("header declares {count} rows, found {}", rows.len()),
        });
    }
    Ok(TextRows { dim, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vocab() -> Vocab {
        Vocab::build(&[vec!["sun", "sun", "sea"]], 1)
    }

    #[test]
    fn text_round_trip_is_exact() {
        let v = vocab();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let table = EmbeddingTable::new(Matrix::random_uniform(v.len(), 3, 1.0, &mut rng));
        let mut buf = Vec::new();
        table.write_text(&v, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("6 3\n<pad> "));
        let (back, missing) = EmbeddingTable::read_text(&buf[..], &v).unwrap();
        assert_eq!(missing, 0);
        assert_eq!(back, table);
    }

    #[test]
    fn partial_file_reports_missing() {
        let v = vocab();
        let (t, missing) = EmbeddingTable::read_text("1 2\nsea 0.5 -1\n".as_bytes(), &v).unwrap();
        assert_eq!(missing, 5);
        assert_eq!(t.row(v.id("sea")), &[0.5, -1.0]);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let v = vocab();
        let err = EmbeddingTable::read_text("2 2\nsea 0.5 -1\nsun 1\n".as_bytes(), &v).unwrap_err();
        assert!(matches!(err, TextError::Parse { line: 3, .. }), "{err}");
        let err = EmbeddingTable::read_text("3 2\nsea 0.5 -1\n".as_bytes(), &v).unwrap_err();
        assert!(matches!(err, TextError::Parse { .. }));
    }
}

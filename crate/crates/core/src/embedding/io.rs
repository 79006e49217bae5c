//! Embedding persistence.
//!
//! Text vectors: a `<count> <dim>` header line followed by one
//! `<word> <v1> ... <vdim>` line per word.
//!
//! Binary container (all integers and floats little-endian):
//!
//! ```text
//! "UEMB" | version u32 | dim u32
//! has_params u8 [window u32 negatives u32 epochs u32 lr f64 min_n u32 max_n u32
//!                buckets u32 min_count u64 seed u64 threads u32]
//! vocab u64 | vocab x (len u32, utf-8 bytes, count u64) | vocab*dim f32
//! has_subwords u8 [min_n u32 max_n u32 buckets u32 rows u64 | rows x u32 ids | rows*dim f32]
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{EmbeddingError, EmbeddingModel, SkipGramParams, SubwordTable};

const MAGIC: &[u8; 4] = b"UEMB";
const VERSION: u32 = 1;

/// Loads pre-trained vectors in the text format. The result is lookup-only:
/// out-of-vocabulary words map to the zero vector.
pub fn load_pretrained_vectors(path: impl AsRef<Path>) -> Result<EmbeddingModel, EmbeddingError> {
    parse_text_vectors(BufReader::new(File::open(path)?))
}

pub fn parse_text_vectors(reader: impl BufRead) -> Result<EmbeddingModel, EmbeddingError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => {
            return Err(EmbeddingError::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let bad_header = || EmbeddingError::Parse {
        line: 1,
        message: format!("expected `<vocab_count> <dim>`, got `{header}`"),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(bad_header());
    }
    let count: usize = fields[0].parse().map_err(|_| bad_header())?;
    let dim: usize = fields[1].parse().map_err(|_| bad_header())?;
    if dim == 0 {
        return Err(bad_header());
    }

    let mut words = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count * dim);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap_or_default().to_string();
        let values: Vec<&str> = parts.collect();
        if values.len() != dim {
            return Err(EmbeddingError::DimensionMismatch {
                line: line_no,
                word,
                expected: dim,
                found: values.len(),
            });
        }
        for v in values {
            vectors.push(v.parse::<f32>().map_err(|e| EmbeddingError::Parse {
                line: line_no,
                message: format!("word `{word}`: bad value `{v}`: {e}"),
            })?);
        }
        words.push(word);
    }
    if words.len() != count {
        return Err(EmbeddingError::Parse {
            line: words.len() + 2,
            message: format!("header promised {count} words, found {}", words.len()),
        });
    }
    let counts = vec![0; words.len()];
    Ok(EmbeddingModel::from_parts(dim, words, counts, vectors, None, None))
}

/// Writes the vocabulary vectors in the text format.
pub fn write_text_vectors(model: &EmbeddingModel, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{} {}", model.vocab_len(), model.dim())?;
    for (i, word) in model.words.iter().enumerate() {
        write!(w, "{word}")?;
        for v in &model.vectors[i * model.dim..(i + 1) * model.dim] {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

impl EmbeddingModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LE>(VERSION)?;
        w.write_u32::<LE>(self.dim as u32)?;
        match &self.params {
            None => w.write_u8(0)?,
            Some(p) => {
                w.write_u8(1)?;
                w.write_u32::<LE>(p.window as u32)?;
                w.write_u32::<LE>(p.negatives as u32)?;
                w.write_u32::<LE>(p.epochs as u32)?;
                w.write_f64::<LE>(p.learning_rate)?;
                w.write_u32::<LE>(p.min_n as u32)?;
                w.write_u32::<LE>(p.max_n as u32)?;
                w.write_u32::<LE>(p.buckets)?;
                w.write_u64::<LE>(p.min_count)?;
                w.write_u64::<LE>(p.seed)?;
                w.write_u32::<LE>(p.threads as u32)?;
            }
        }
        w.write_u64::<LE>(self.words.len() as u64)?;
        for (word, &count) in self.words.iter().zip(&self.counts) {
            w.write_u32::<LE>(word.len() as u32)?;
            w.write_all(word.as_bytes())?;
            w.write_u64::<LE>(count)?;
        }
        write_f32s(w, &self.vectors)?;
        match &self.subwords {
            None => w.write_u8(0)?,
            Some(t) => {
                w.write_u8(1)?;
                w.write_u32::<LE>(t.min_n as u32)?;
                w.write_u32::<LE>(t.max_n as u32)?;
                w.write_u32::<LE>(t.buckets)?;
                w.write_u64::<LE>(t.ids.len() as u64)?;
                for &id in &t.ids {
                    w.write_u32::<LE>(id)?;
                }
                write_f32s(w, &t.rows)?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, EmbeddingError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| EmbeddingError::BadMagic)?;
        if &magic != MAGIC {
            return Err(EmbeddingError::BadMagic);
        }
        let version = r.read_u32::<LE>()?;
        if version != VERSION {
            return Err(EmbeddingError::UnsupportedVersion(version));
        }
        let dim = r.read_u32::<LE>()? as usize;
        if dim == 0 {
            return Err(EmbeddingError::Corrupt("dim is zero".into()));
        }
        let params = match r.read_u8()? {
            0 => None,
            1 => Some(SkipGramParams {
                dim,
                window: r.read_u32::<LE>()? as usize,
                negatives: r.read_u32::<LE>()? as usize,
                epochs: r.read_u32::<LE>()? as usize,
                learning_rate: r.read_f64::<LE>()?,
                min_n: r.read_u32::<LE>()? as usize,
                max_n: r.read_u32::<LE>()? as usize,
                buckets: r.read_u32::<LE>()?,
                min_count: r.read_u64::<LE>()?,
                seed: r.read_u64::<LE>()?,
                threads: r.read_u32::<LE>()? as usize,
            }),
            other => return Err(EmbeddingError::Corrupt(format!("params flag {other}"))),
        };
        let n = read_len(r)?;
        let mut words = Vec::with_capacity(n.min(1 << 20));
        let mut counts = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let len = r.read_u32::<LE>()? as usize;
            let mut bytes = vec![0u8; len];
            r.read_exact(&mut bytes)?;
            let word = String::from_utf8(bytes)
                .map_err(|_| EmbeddingError::Corrupt("word is not utf-8".into()))?;
            words.push(word);
            counts.push(r.read_u64::<LE>()?);
        }
        let vectors = read_f32s(r, n * dim)?;
        let subwords = match r.read_u8()? {
            0 => None,
            1 => {
                let min_n = r.read_u32::<LE>()? as usize;
                let max_n = r.read_u32::<LE>()? as usize;
                let buckets = r.read_u32::<LE>()?;
                let rows = read_len(r)?;
                let mut ids = Vec::with_capacity(rows.min(1 << 24));
                for _ in 0..rows {
                    ids.push(r.read_u32::<LE>()?);
                }
                if buckets == 0 || ids.windows(2).any(|p| p[0] >= p[1]) {
                    return Err(EmbeddingError::Corrupt("bucket table not sorted".into()));
                }
                Some(SubwordTable {
                    min_n,
                    max_n,
                    buckets,
                    ids,
                    rows: read_f32s(r, rows * dim)?,
                })
            }
            other => return Err(EmbeddingError::Corrupt(format!("subword flag {other}"))),
        };
        Ok(EmbeddingModel::from_parts(dim, words, counts, vectors, subwords, params))
    }
}

fn read_len(r: &mut impl Read) -> Result<usize, EmbeddingError> {
    usize::try_from(r.read_u64::<LE>()?).map_err(|_| EmbeddingError::Corrupt("length overflow".into()))
}

fn write_f32s(w: &mut impl Write, values: &[f32]) -> std::io::Result<()> {
    for &v in values {
        w.write_f32::<LE>(v)?;
    }
    Ok(())
}

fn read_f32s(r: &mut impl Read, n: usize) -> Result<Vec<f32>, EmbeddingError> {
    let mut out = Vec::with_capacity(n.min(1 << 26));
    for _ in 0..n {
        out.push(r.read_f32::<LE>()?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_text_vectors() {
        let m = parse_text_vectors("2 3\ncat 1 0 0\ndog 0 1 0\n".as_bytes()).unwrap();
        assert_eq!(m.vocab_len(), 2);
        assert_eq!(m.dim(), 3);
        assert_eq!(m.word_vector("dog"), [0.0, 1.0, 0.0]);
        assert_eq!(m.word_vector("bird"), [0.0, 0.0, 0.0]);
        assert!(!m.has_subwords());
    }

    #[test]
    fn short_row_names_the_word() {
        match parse_text_vectors("2 3\ncat 1 0 0\ndog 0 1\n".as_bytes()) {
            Err(EmbeddingError::DimensionMismatch { word, line, expected, found }) => {
                assert_eq!(word, "dog");
                assert_eq!((line, expected, found), (3, 3, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_header() {
        for input in ["", "abc\n", "2\n", "2 x\n", "2 0\n"] {
            match parse_text_vectors(input.as_bytes()) {
                Err(EmbeddingError::Parse { line, .. }) => assert_eq!(line, 1),
                other => panic!("{input:?}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let m = parse_text_vectors("2 2\na 0.5 -1.25\nb 3 4\n".as_bytes()).unwrap();
        let mut out = Vec::new();
        write_text_vectors(&m, &mut out).unwrap();
        assert_eq!(parse_text_vectors(out.as_slice()).unwrap(), m);
    }

    #[test]
    fn binary_rejects_unknown_version_and_magic() {
        let m = parse_text_vectors("1 2\na 1 2\n".as_bytes()).unwrap();
        let mut bytes = m.to_bytes();
        assert_eq!(EmbeddingModel::read_from(&mut bytes.as_slice()).unwrap(), m);
        bytes[4] = 9;
        assert!(matches!(
            EmbeddingModel::read_from(&mut bytes.as_slice()),
            Err(EmbeddingError::UnsupportedVersion(9))
        ));
        bytes[0] = b'X';
        assert!(matches!(
            EmbeddingModel::read_from(&mut bytes.as_slice()),
            Err(EmbeddingError::BadMagic)
        ));
    }
}

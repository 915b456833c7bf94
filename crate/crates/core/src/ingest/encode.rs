use rayon::prelude::*;

use super::{check_unique, GenotypeDataset, IngestError, MISSING};

/// Row-major packed bit grid. Bit `c` of a row lives in word `c / 64` at
/// position `c % 64`; padding bits past `cols` are always zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitGrid {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitGrid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64);
        Self { rows, cols, words_per_row, words: vec![0; rows * words_per_row] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        debug_assert!(row < self.rows && col < self.cols);
        self.words[row * self.words_per_row + col / 64] >> (col % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        debug_assert!(row < self.rows && col < self.cols);
        let word = &mut self.words[row * self.words_per_row + col / 64];
        let mask = 1u64 << (col % 64);
        if value {
            *word |= mask;
        } else {
            *word &= !mask;
        }
    }

    pub fn row_words(&self, row: usize) -> &[u64] {
        &self.words[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    /// Mutable access to every row's words, for parallel fills. Callers must
    /// keep padding bits zero.
    pub(crate) fn rows_mut(&mut self) -> impl IndexedParallelIterator<Item = &mut [u64]> {
        self.words.par_chunks_mut(self.words_per_row.max(1))
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn column_ones(&self, col: usize) -> usize {
        (0..self.rows).filter(|&r| self.get(r, col)).count()
    }

    pub fn same_shape(&self, other: &BitGrid) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    /// In-place exclusive-or with a grid of the same shape.
    pub fn xor_assign(&mut self, other: &BitGrid) -> Result<(), IngestError> {
        if !self.same_shape(other) {
            return Err(IngestError::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        self.words.par_iter_mut().zip(other.words.par_iter()).for_each(|(a, b)| *a ^= b);
        Ok(())
    }
}

/// Bit-packed `n x 2m` encoding of a genotype dataset. Bit columns `2j` and
/// `2j + 1` belong to SNP `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    sample_ids: Vec<String>,
    rsids: Vec<String>,
    bits: BitGrid,
}

impl BinaryMatrix {
    pub fn new(sample_ids: Vec<String>, rsids: Vec<String>, bits: BitGrid) -> Result<Self, IngestError> {
        if bits.rows() != sample_ids.len() || bits.cols() != 2 * rsids.len() {
            return Err(IngestError::Shape(format!(
                "{}x{} bits for {} samples and {} SNPs",
                bits.rows(),
                bits.cols(),
                sample_ids.len(),
                rsids.len()
            )));
        }
        Ok(Self { sample_ids, rsids, bits })
    }

    pub fn rows(&self) -> usize {
        self.bits.rows()
    }

    pub fn bit_columns(&self) -> usize {
        self.bits.cols()
    }

    pub fn bits(&self) -> &BitGrid {
        &self.bits
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    /// SNP identifiers, one per bit pair.
    pub fn rsids(&self) -> &[String] {
        &self.rsids
    }

    /// rsid owning bit column `col`.
    pub fn column_rsid(&self, col: usize) -> &str {
        &self.rsids[col / 2]
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits.get(row, col)
    }

    pub fn with_bits(&self, bits: BitGrid) -> Result<Self, IngestError> {
        Self::new(self.sample_ids.clone(), self.rsids.clone(), bits)
    }

    pub fn into_bits(self) -> BitGrid {
        self.bits
    }
}

/// Threshold code: `g -> (g >= 1, g == 2)`.
pub fn encode_binary(ds: &GenotypeDataset) -> Result<BinaryMatrix, IngestError> {
    let mut bits = BitGrid::zeros(ds.n(), 2 * ds.m());
    for (i, row) in ds.rows().enumerate() {
        for (j, &g) in row.iter().enumerate() {
            if g == MISSING {
                return Err(IngestError::MissingGenotype { row: i, column: j });
            }
            bits.set(i, 2 * j, g >= 1);
            bits.set(i, 2 * j + 1, g == 2);
        }
    }
    BinaryMatrix::new(ds.sample_ids().to_vec(), ds.rsids().to_vec(), bits)
}

/// Popcount of each bit pair. `(0, 1)`, unreachable by encoding but possible
/// after perturbation, decodes to 1.
pub fn decode_binary(bm: &BinaryMatrix) -> GenotypeDataset {
    let m = bm.rsids().len();
    let mut cells = Vec::with_capacity(bm.rows() * m);
    for i in 0..bm.rows() {
        for j in 0..m {
            cells.push(u8::from(bm.get(i, 2 * j)) + u8::from(bm.get(i, 2 * j + 1)));
        }
    }
    GenotypeDataset::new(bm.sample_ids().to_vec(), bm.rsids().to_vec(), cells)
        .expect("binary matrix ids are validated on construction")
}

/// Text form of a bit matrix: one line per bit column,
/// `rsid<TAB>{1|2}<TAB>bits...`, under a `rsid<TAB>bit<TAB>samples...` header.
pub fn serialize_binary_matrix(bm: &BinaryMatrix) -> String {
    let mut out = String::with_capacity((bm.rows() * 2 + 16) * (bm.bit_columns() + 1));
    out.push_str("rsid\tbit");
    for id in bm.sample_ids() {
        out.push('\t');
        out.push_str(id);
    }
    out.push('\n');
    for c in 0..bm.bit_columns() {
        out.push_str(bm.column_rsid(c));
        out.push_str(if c % 2 == 0 { "\t1" } else { "\t2" });
        for r in 0..bm.rows() {
            out.push_str(if bm.get(r, c) { "\t1" } else { "\t0" });
        }
        out.push('\n');
    }
    out
}

pub fn parse_binary_matrix(text: &str) -> Result<BinaryMatrix, IngestError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| IngestError::Parse {
        line: 1,
        details: "empty input".into(),
    })?;
    let mut fields = header.split('\t');
    if fields.next() != Some("rsid") || fields.next() != Some("bit") {
        return Err(IngestError::Parse {
            line: 1,
            details: "header must start with \"rsid\\tbit\"".into(),
        });
    }
    let sample_ids: Vec<String> = fields.map(str::to_owned).collect();
    let n = sample_ids.len();
    let mut rsids = Vec::new();
    let mut columns: Vec<Vec<bool>> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let mut fields = line.split('\t');
        let rsid = fields.next().unwrap_or_default();
        let which = fields.next();
        let expected = if columns.len().is_multiple_of(2) { "1" } else { "2" };
        if rsid.is_empty() || which != Some(expected) {
            return Err(IngestError::Parse {
                line: line_no,
                details: format!("expected bit {expected} of a SNP"),
            });
        }
        if expected == "1" {
            rsids.push(rsid.to_owned());
        } else if rsids.last().map(String::as_str) != Some(rsid) {
            return Err(IngestError::Parse {
                line: line_no,
                details: format!("bit 2 of {rsid} does not follow its bit 1"),
            });
        }
        let col = fields
            .map(|t| match t {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(IngestError::Value { line: line_no, value: t.to_owned() }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if col.len() != n {
            return Err(IngestError::Parse {
                line: line_no,
                details: format!("expected {n} bits, found {}", col.len()),
            });
        }
        columns.push(col);
    }
    if !columns.len().is_multiple_of(2) {
        return Err(IngestError::Parse {
            line: columns.len() + 1,
            details: "odd number of bit columns".into(),
        });
    }
    let mut bits = BitGrid::zeros(n, columns.len());
    for (c, col) in columns.iter().enumerate() {
        for (r, &b) in col.iter().enumerate() {
            bits.set(r, c, b);
        }
    }
    check_unique(&sample_ids)?;
    check_unique(&rsids)?;
    BinaryMatrix::new(sample_ids, rsids, bits)
}

//! Genotype and reference-panel ingestion.
//!
//! Genotypes are stored as minor-allele counts in `{0, 1, 2}` with a
//! dedicated [`MISSING`] marker. A [`GenotypeDataset`] is an `n x m` grid
//! (samples by SNPs) stored row-major; the TSV on disk is the transpose
//! (one line per SNP).

mod align;
mod encode;
mod tsv;

pub use align::{align_to_reference, impute_missing, AlignmentReport};
pub use encode::{
    decode_binary, encode_binary, parse_binary_matrix, serialize_binary_matrix, BinaryMatrix,
    BitGrid,
};
pub use tsv::{
    parse_genotype_matrix, parse_raw_snp_export, parse_reference_panel, serialize_genotype_matrix,
    serialize_reference_panel,
};

use std::collections::HashSet;

use thiserror::Error;

/// Marker stored in a genotype cell that has no call.
pub const MISSING: u8 = u8::MAX;

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("parse error at line {line}: {details}")]
    Parse { line: usize, details: String },

    #[error("invalid value {value:?} at line {line}")]
    Value { line: usize, value: String },

    #[error("duplicate identifier {0:?}")]
    Duplicate(String),

    #[error("no SNPs shared between dataset and reference panel")]
    EmptyIntersection,

    #[error("missing genotype at sample {row}, SNP {column}; impute before encoding")]
    MissingGenotype { row: usize, column: usize },

    #[error("shape error: {0}")]
    Shape(String),
}

/// A single base of a biallelic SNP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Base {
    A,
    C,
    G,
    T,
}

impl Base {
    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'A' => Some(Base::A),
            'C' => Some(Base::C),
            'G' => Some(Base::G),
            'T' => Some(Base::T),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Base::A => 'A',
            Base::C => 'C',
            Base::G => 'G',
            Base::T => 'T',
        }
    }
}

/// Public per-SNP statistics.
///
/// `allele` is the allele listed in the panel file. When the listed
/// frequency exceeded 0.5 the entry is normalized: `maf` holds `1 - listed`
/// and `swapped` is set, meaning `allele` is actually the major allele and
/// minor-allele counts are `2 - occurrences(allele)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnpDescriptor {
    pub rsid: String,
    pub allele: Base,
    pub maf: f64,
    pub swapped: bool,
}

impl SnpDescriptor {
    /// Minor-allele count for a call containing `occurrences` copies of the
    /// listed allele.
    pub fn minor_count(&self, occurrences: u8) -> u8 {
        if self.swapped {
            2 - occurrences
        } else {
            occurrences
        }
    }
}

/// Reference panel, kept sorted by rsid with unique entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferencePanel {
    snps: Vec<SnpDescriptor>,
}

impl ReferencePanel {
    /// Builds a panel, sorting by rsid and rejecting duplicates.
    pub fn new(mut snps: Vec<SnpDescriptor>) -> Result<Self, IngestError> {
        snps.sort_by(|a, b| a.rsid.cmp(&b.rsid));
        if let Some(w) = snps.windows(2).find(|w| w[0].rsid == w[1].rsid) {
            return Err(IngestError::Duplicate(w[0].rsid.clone()));
        }
        if let Some(s) = snps.iter().find(|s| s.rsid.is_empty()) {
            return Err(IngestError::Value { line: 0, value: s.rsid.clone() });
        }
        Ok(Self { snps })
    }

    pub fn snps(&self) -> &[SnpDescriptor] {
        &self.snps
    }

    pub fn len(&self) -> usize {
        self.snps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snps.is_empty()
    }

    pub fn get(&self, rsid: &str) -> Option<&SnpDescriptor> {
        self.position(rsid).map(|i| &self.snps[i])
    }

    pub fn position(&self, rsid: &str) -> Option<usize> {
        self.snps.binary_search_by(|s| s.rsid.as_str().cmp(rsid)).ok()
    }

    /// Minor-allele frequencies for the given rsids, in order.
    pub fn mafs_for(&self, rsids: &[String]) -> Result<Vec<f64>, IngestError> {
        rsids
            .iter()
            .map(|r| {
                self.get(r)
                    .map(|s| s.maf)
                    .ok_or_else(|| IngestError::Shape(format!("SNP {r} is not in the reference panel")))
            })
            .collect()
    }
}

/// Samples-by-SNPs genotype grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeDataset {
    sample_ids: Vec<String>,
    rsids: Vec<String>,
    genotypes: Vec<u8>,
}

impl GenotypeDataset {
    /// `genotypes` is row-major, `sample_ids.len()` rows of `rsids.len()` cells.
    pub fn new(
        sample_ids: Vec<String>,
        rsids: Vec<String>,
        genotypes: Vec<u8>,
    ) -> Result<Self, IngestError> {
        if genotypes.len() != sample_ids.len() * rsids.len() {
            return Err(IngestError::Shape(format!(
                "{} cells for {} samples x {} SNPs",
                genotypes.len(),
                sample_ids.len(),
                rsids.len()
            )));
        }
        check_unique(&sample_ids)?;
        check_unique(&rsids)?;
        if let Some(&g) = genotypes.iter().find(|&&g| g > 2 && g != MISSING) {
            return Err(IngestError::Value { line: 0, value: g.to_string() });
        }
        Ok(Self { sample_ids, rsids, genotypes })
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn rsids(&self) -> &[String] {
        &self.rsids
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.sample_ids.len()
    }

    /// Number of SNPs.
    pub fn m(&self) -> usize {
        self.rsids.len()
    }

    pub fn get(&self, row: usize, column: usize) -> u8 {
        self.genotypes[row * self.m() + column]
    }

    pub fn row(&self, row: usize) -> &[u8] {
        let m = self.m();
        &self.genotypes[row * m..(row + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        (0..self.n()).map(move |r| self.row(r))
    }

    pub fn cells(&self) -> &[u8] {
        &self.genotypes
    }

    pub fn has_missing(&self) -> bool {
        self.genotypes.contains(&MISSING)
    }

    /// Copy restricted to the given column indices, in that order.
    pub fn select_columns(&self, columns: &[usize]) -> Self {
        let mut genotypes = Vec::with_capacity(self.n() * columns.len());
        for row in self.rows() {
            genotypes.extend(columns.iter().map(|&c| row[c]));
        }
        Self {
            sample_ids: self.sample_ids.clone(),
            rsids: columns.iter().map(|&c| self.rsids[c].clone()).collect(),
            genotypes,
        }
    }

    /// Copy restricted to the given rows, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut genotypes = Vec::with_capacity(rows.len() * self.m());
        for &r in rows {
            genotypes.extend_from_slice(self.row(r));
        }
        Self {
            sample_ids: rows.iter().map(|&r| self.sample_ids[r].clone()).collect(),
            rsids: self.rsids.clone(),
            genotypes,
        }
    }

    pub(crate) fn cells_mut(&mut self) -> &mut [u8] {
        &mut self.genotypes
    }
}

pub(super) fn check_unique(ids: &[String]) -> Result<(), IngestError> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(IngestError::Duplicate(id.clone()));
        }
    }
    Ok(())
}

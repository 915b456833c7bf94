use std::collections::HashMap;

use super::{GenotypeDataset, IngestError, ReferencePanel, MISSING};

/// SNPs of the input dataset that the panel does not cover, sorted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlignmentReport {
    pub dropped: Vec<String>,
}

/// Restricts `ds` to the SNPs present in `panel`, in panel order.
pub fn align_to_reference(
    ds: &GenotypeDataset,
    panel: &ReferencePanel,
) -> Result<(GenotypeDataset, AlignmentReport), IngestError> {
    let index: HashMap<&str, usize> =
        ds.rsids().iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
    let columns: Vec<usize> = panel
        .snps()
        .iter()
        .filter_map(|s| index.get(s.rsid.as_str()).copied())
        .collect();
    if columns.is_empty() {
        return Err(IngestError::EmptyIntersection);
    }
    let mut dropped: Vec<String> = ds
        .rsids()
        .iter()
        .filter(|r| panel.position(r).is_none())
        .cloned()
        .collect();
    dropped.sort();
    Ok((ds.select_columns(&columns), AlignmentReport { dropped }))
}

/// Most likely genotype under Hardy-Weinberg equilibrium at minor-allele
/// frequency `f`; ties go to the smaller count.
pub fn hwe_mode(f: f64) -> u8 {
    let probs = [(1.0 - f) * (1.0 - f), 2.0 * f * (1.0 - f), f * f];
    let mut best = 0;
    for g in 1..3 {
        if probs[g] > probs[best] {
            best = g;
        }
    }
    best as u8
}

/// Fills every missing call with the Hardy-Weinberg mode of its panel SNP.
pub fn impute_missing(
    ds: &GenotypeDataset,
    panel: &ReferencePanel,
) -> Result<GenotypeDataset, IngestError> {
    let fill: Vec<u8> = panel.mafs_for(ds.rsids())?.into_iter().map(hwe_mode).collect();
    let mut out = ds.clone();
    let m = out.m();
    if m == 0 {
        return Ok(out);
    }
    for row in out.cells_mut().chunks_exact_mut(m) {
        for (cell, &g) in row.iter_mut().zip(&fill) {
            if *cell == MISSING {
                *cell = g;
            }
        }
    }
    Ok(out)
}

//! Synthetic panels and Hardy-Weinberg populations for evaluation and
//! demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{Base, GenotypeDataset, ReferencePanel, SnpDescriptor};

/// Panel of `m` SNPs `rs0000001..` with MAFs uniform in `[min_maf, 0.5]`.
pub fn synthetic_panel(m: usize, min_maf: f64, seed: u64) -> ReferencePanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bases = [Base::A, Base::C, Base::G, Base::T];
    let snps = (0..m)
        .map(|j| SnpDescriptor {
            rsid: format!("rs{:07}", j + 1),
            allele: bases[rng.gen_range(0..4)],
            maf: rng.gen_range(min_maf..=0.5),
            swapped: false,
        })
        .collect();
    ReferencePanel::new(snps).expect("generated rsids are unique")
}

/// `n` individuals with genotypes `Bin(2, f_j)` drawn independently per SNP.
pub fn hwe_population(
    rsids: &[String],
    mafs: &[f64],
    n: usize,
    seed: u64,
    id_prefix: &str,
) -> GenotypeDataset {
    assert_eq!(rsids.len(), mafs.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::with_capacity(n * mafs.len());
    for _ in 0..n {
        for &f in mafs {
            cells.push(u8::from(rng.gen_bool(f)) + u8::from(rng.gen_bool(f)));
        }
    }
    GenotypeDataset::new(
        (0..n).map(|i| format!("{id_prefix}{i}")).collect(),
        rsids.to_vec(),
        cells,
    )
    .expect("shape matches by construction")
}

/// Population drawn at every SNP of `panel`, in panel order.
pub fn panel_population(panel: &ReferencePanel, n: usize, seed: u64, id_prefix: &str) -> GenotypeDataset {
    let rsids: Vec<String> = panel.snps().iter().map(|s| s.rsid.clone()).collect();
    let mafs: Vec<f64> = panel.snps().iter().map(|s| s.maf).collect();
    hwe_population(&rsids, &mafs, n, seed, id_prefix)
}

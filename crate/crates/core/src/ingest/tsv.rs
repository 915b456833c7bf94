use std::collections::HashSet;
use std::fmt::Write as _;

use super::{Base, GenotypeDataset, IngestError, ReferencePanel, SnpDescriptor, MISSING};

const HEADER_KEY: &str = "rsid";

/// Parses the SNP-per-line genotype matrix TSV (tab-separated):
///
/// ```text
/// rsid  s1  s2
/// rs1   0   2
/// rs2   NA  1
/// ```
pub fn parse_genotype_matrix(text: &str) -> Result<GenotypeDataset, IngestError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| IngestError::Parse {
        line: 1,
        details: "empty input".into(),
    })?;
    let mut fields = header.split('\t');
    if fields.next() != Some(HEADER_KEY) {
        return Err(IngestError::Parse {
            line: 1,
            details: format!("header must start with {HEADER_KEY:?}"),
        });
    }
    let sample_ids: Vec<String> = fields.map(str::to_owned).collect();
    let n = sample_ids.len();

    let mut rsids = Vec::new();
    let mut seen = HashSet::new();
    let mut columns: Vec<u8> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let mut fields = line.split('\t');
        let rsid = fields.next().unwrap_or_default();
        if rsid.is_empty() {
            return Err(IngestError::Parse { line: line_no, details: "empty rsid".into() });
        }
        let start = columns.len();
        for token in fields {
            columns.push(parse_genotype_token(token).ok_or_else(|| IngestError::Value {
                line: line_no,
                value: token.to_owned(),
            })?);
        }
        let got = columns.len() - start;
        if got != n {
            return Err(IngestError::Parse {
                line: line_no,
                details: format!("expected {n} genotype fields, found {got}"),
            });
        }
        if !seen.insert(rsid.to_owned()) {
            return Err(IngestError::Duplicate(rsid.to_owned()));
        }
        rsids.push(rsid.to_owned());
    }

    // columns holds the file's SNP-major layout; the dataset is sample-major
    let m = rsids.len();
    let mut genotypes = vec![MISSING; n * m];
    for (j, snp) in columns.chunks_exact(n.max(1)).enumerate().take(m) {
        for (i, &g) in snp.iter().enumerate() {
            genotypes[i * m + j] = g;
        }
    }
    GenotypeDataset::new(sample_ids, rsids, genotypes)
}

fn parse_genotype_token(token: &str) -> Option<u8> {
    match token {
        "0" => Some(0),
        "1" => Some(1),
        "2" => Some(2),
        "NA" => Some(MISSING),
        _ => None,
    }
}

/// Writes the genotype matrix TSV: LF endings, no trailing whitespace, one
/// line per SNP in column order.
pub fn serialize_genotype_matrix(ds: &GenotypeDataset) -> String {
    let mut out = String::with_capacity((ds.n() * 2 + 16) * (ds.m() + 1));
    out.push_str(HEADER_KEY);
    for id in ds.sample_ids() {
        out.push('\t');
        out.push_str(id);
    }
    out.push('\n');
    for (j, rsid) in ds.rsids().iter().enumerate() {
        out.push_str(rsid);
        for i in 0..ds.n() {
            out.push('\t');
            match ds.get(i, j) {
                MISSING => out.push_str("NA"),
                g => out.push(char::from(b'0' + g)),
            }
        }
        out.push('\n');
    }
    out
}

/// Parses `rsid<TAB>allele<TAB>maf` lines. Frequencies above 0.5 are
/// normalized to the other allele and flagged as swapped.
pub fn parse_reference_panel(text: &str) -> Result<ReferencePanel, IngestError> {
    let mut snps = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        let [rsid, allele, maf] = fields[..] else {
            return Err(IngestError::Parse {
                line: line_no,
                details: format!("expected 3 fields, found {}", fields.len()),
            });
        };
        if rsid.is_empty() {
            return Err(IngestError::Parse { line: line_no, details: "empty rsid".into() });
        }
        let allele = single_base(allele).ok_or_else(|| IngestError::Value {
            line: line_no,
            value: allele.to_owned(),
        })?;
        let value_err = || IngestError::Value { line: line_no, value: maf.to_owned() };
        let listed: f64 = maf.parse().map_err(|_| value_err())?;
        if !(0.0..=1.0).contains(&listed) {
            return Err(value_err());
        }
        let swapped = listed > 0.5;
        snps.push(SnpDescriptor {
            rsid: rsid.to_owned(),
            allele,
            maf: if swapped { 1.0 - listed } else { listed },
            swapped,
        });
    }
    ReferencePanel::new(snps)
}

fn single_base(s: &str) -> Option<Base> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Base::from_char(c),
        _ => None,
    }
}

/// Writes a panel in the form it was read (swapped entries get their
/// listed frequency back).
pub fn serialize_reference_panel(panel: &ReferencePanel) -> String {
    let mut out = String::new();
    for s in panel.snps() {
        let maf = if s.swapped { 1.0 - s.maf } else { s.maf };
        let _ = writeln!(out, "{}\t{}\t{}", s.rsid, s.allele.as_char(), maf);
    }
    out
}

/// Parses a consumer genotyping export (`rsid chrom pos alleles`, `#`
/// comments) into a one-sample dataset over the panel SNPs it covers.
///
/// Calls that cannot be interpreted as a biallelic genotype of the panel SNP
/// become [`MISSING`]: no-calls (`--`), non-ACGT letters, haploid calls, and
/// heterozygotes of two bases neither of which is the panel allele.
pub fn parse_raw_snp_export(
    text: &str,
    panel: &ReferencePanel,
    sample_id: &str,
) -> Result<GenotypeDataset, IngestError> {
    let mut calls: Vec<(usize, u8)> = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [rsid, _chrom, pos, alleles] = fields[..] else {
            return Err(IngestError::Parse {
                line: line_no,
                details: format!("expected 4 fields, found {}", fields.len()),
            });
        };
        if rsid.is_empty() || pos.parse::<u64>().is_err() {
            return Err(IngestError::Parse {
                line: line_no,
                details: format!("malformed record {line:?}"),
            });
        }
        if alleles.is_empty() || alleles.chars().count() > 2 {
            return Err(IngestError::Parse {
                line: line_no,
                details: format!("malformed allele call {alleles:?}"),
            });
        }
        let Some(col) = panel.position(rsid) else {
            continue;
        };
        if !seen.insert(col) {
            return Err(IngestError::Duplicate(rsid.to_owned()));
        }
        calls.push((col, call_to_genotype(alleles, &panel.snps()[col])));
    }
    calls.sort_unstable_by_key(|&(col, _)| col);
    let rsids = calls.iter().map(|&(c, _)| panel.snps()[c].rsid.clone()).collect();
    let genotypes = calls.into_iter().map(|(_, g)| g).collect();
    GenotypeDataset::new(vec![sample_id.to_owned()], rsids, genotypes)
}

fn call_to_genotype(alleles: &str, snp: &SnpDescriptor) -> u8 {
    let bases: Option<Vec<Base>> = alleles.chars().map(Base::from_char).collect();
    let Some(bases) = bases else {
        return MISSING;
    };
    let [a, b] = bases[..] else {
        return MISSING;
    };
    if a != b && a != snp.allele && b != snp.allele {
        return MISSING;
    }
    let occurrences = u8::from(a == snp.allele) + u8::from(b == snp.allele);
    snp.minor_count(occurrences)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(lines: &str) -> ReferencePanel {
        parse_reference_panel(lines).unwrap()
    }

    #[test]
    fn parses_small_matrix() {
        let ds = parse_genotype_matrix("rsid\ta\tb\tc\nrs1\t0\t1\t2\nrs2\tNA\t2\t0\n").unwrap();
        assert_eq!((ds.n(), ds.m()), (3, 2));
        assert_eq!(ds.row(0), &[0, MISSING]);
        assert_eq!(ds.row(1), &[1, 2]);
        assert_eq!(ds.row(2), &[2, 0]);
        assert_eq!(ds.rsids(), &["rs1", "rs2"]);
    }

    #[test]
    fn rejects_out_of_domain_token() {
        let err = parse_genotype_matrix("rsid\ta\nrs1\t3\n").unwrap_err();
        assert_eq!(err, IngestError::Value { line: 2, value: "3".into() });
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = parse_genotype_matrix("rsid\ta\tb\nrs1\t0\t1\nrs2\t0\n").unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn duplicate_rsid_and_sample() {
        assert_eq!(
            parse_genotype_matrix("rsid\ta\nrs1\t0\nrs1\t1\n").unwrap_err(),
            IngestError::Duplicate("rs1".into())
        );
        assert_eq!(
            parse_genotype_matrix("rsid\ta\ta\nrs1\t0\t1\n").unwrap_err(),
            IngestError::Duplicate("a".into())
        );
    }

    #[test]
    fn serializer_is_exact() {
        let text = "rsid\ts1\ts2\nrs9\t2\tNA\nrs1\t0\t1\n";
        let ds = parse_genotype_matrix(text).unwrap();
        assert_eq!(serialize_genotype_matrix(&ds), text);
    }

    #[test]
    fn panel_sorted_and_validated() {
        let p = panel("rs3\tA\t0.1\nrs1\tC\t0.2\nrs2\tG\t0.5\n");
        let ids: Vec<_> = p.snps().iter().map(|s| s.rsid.as_str()).collect();
        assert_eq!(ids, ["rs1", "rs2", "rs3"]);
        assert!(matches!(
            parse_reference_panel("rs1\tA\t1.2\n").unwrap_err(),
            IngestError::Value { line: 1, .. }
        ));
        assert_eq!(
            parse_reference_panel("rs1\tA\t0.1\nrs1\tC\t0.2\n").unwrap_err(),
            IngestError::Duplicate("rs1".into())
        );
    }

    #[test]
    fn panel_maf_above_half_is_swapped() {
        let p = panel("rs1\tA\t0.7\n");
        let s = &p.snps()[0];
        assert!(s.swapped);
        assert!((s.maf - 0.3).abs() < 1e-12);
        assert_eq!(serialize_reference_panel(&p), "rs1\tA\t0.7\n");
    }

    #[test]
    fn consumer_export_counts_minor_allele() {
        let p = panel("rs1\tA\t0.2\nrs2\tA\t0.2\nrs3\tA\t0.2\nrs4\tG\t0.7\n");
        let text = "# rsid\tchromosome\tposition\tgenotype\n\
                    rs2\t1\t200\tAG\n\
                    rs1\t1\t100\tAA\n\
                    rs3\t1\t300\t--\n\
                    rs4\t2\t50\tGG\n\
                    rs99\t3\t1\tCC\n";
        let ds = parse_raw_snp_export(text, &p, "me").unwrap();
        assert_eq!(ds.rsids(), &["rs1", "rs2", "rs3", "rs4"]);
        // rs4 lists the major allele, so GG carries no minor allele
        assert_eq!(ds.row(0), &[2, 1, MISSING, 0]);
    }

    #[test]
    fn consumer_export_odd_calls() {
        let p = panel("rs1\tA\t0.2\n");
        let one = |call: &str| {
            let text = format!("rs1\t1\t1\t{call}\n");
            parse_raw_snp_export(&text, &p, "x").unwrap().get(0, 0)
        };
        assert_eq!(one("CC"), 0);
        assert_eq!(one("CG"), MISSING);
        assert_eq!(one("A"), MISSING);
        assert_eq!(one("DI"), MISSING);
        assert!(matches!(
            parse_raw_snp_export("rs1\t1\tAA\n", &p, "x").unwrap_err(),
            IngestError::Parse { line: 1, .. }
        ));
    }
}

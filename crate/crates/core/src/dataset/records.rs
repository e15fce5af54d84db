use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DatasetError;
use crate::detection::Modality;

/// Recording quality grade as assigned by the source archive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Quality {
    /// Best.
    A,
    /// Good.
    B,
    /// Average.
    C,
    /// Poor.
    D,
    /// Worst.
    E,
    /// Not graded.
    #[cfg_attr(feature = "serde", serde(rename = "unknown", alias = "no score", alias = ""))]
    Unknown,
}

impl Quality {
    /// The grades used for training by default.
    pub const DEFAULT_ALLOWED: [Quality; 3] = [Quality::A, Quality::B, Quality::C];
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quality::A => "A",
            Quality::B => "B",
            Quality::C => "C",
            Quality::D => "D",
            Quality::E => "E",
            Quality::Unknown => "unknown",
        })
    }
}

impl FromStr for Quality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Quality::A),
            "B" | "b" => Ok(Quality::B),
            "C" | "c" => Ok(Quality::C),
            "D" | "d" => Ok(Quality::D),
            "E" | "e" => Ok(Quality::E),
            "unknown" | "" | "no score" => Ok(Quality::Unknown),
            other => Err(format!("unknown quality grade {other:?}")),
        }
    }
}

/// Split a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SplitName {
    /// Training.
    Train,
    /// Validation.
    Val,
    /// Held-out test.
    Test,
}

impl SplitName {
    /// Lowercase name.
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }
}

/// One labeled sample.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleRecord {
    /// Opaque id, unique within a manifest.
    pub id: String,
    /// Scientific name.
    pub species: String,
    /// Quality grade.
    pub quality: Quality,
    /// Audio or image.
    pub modality: Modality,
    /// Path of the media file.
    pub media_path: String,
    /// License string of the media.
    pub license: String,
    /// Split the source archive assigned, if any.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub origin_split: Option<SplitName>,
}

/// Records plus the ordered species catalog (index = class id).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    records: Vec<SampleRecord>,
    catalog: Vec<String>,
}

impl DatasetManifest {
    /// Builds a manifest, checking id uniqueness and catalog membership.
    pub fn new(records: Vec<SampleRecord>, catalog: Vec<String>) -> Result<Self, DatasetError> {
        let dups = duplicate_ids(&records);
        if !dups.is_empty() {
            return Err(DatasetError::DuplicateIds(dups));
        }
        let known: BTreeSet<&str> = catalog.iter().map(String::as_str).collect();
        if known.len() != catalog.len() {
            return Err(DatasetError::Config("catalog lists a species twice".into()));
        }
        if let Some(r) = records.iter().find(|r| !known.contains(r.species.as_str())) {
            return Err(DatasetError::UnknownSpecies { id: r.id.clone(), species: r.species.clone() });
        }
        Ok(Self { records, catalog })
    }

    pub(crate) fn from_parts_unchecked(records: Vec<SampleRecord>, catalog: Vec<String>) -> Self {
        Self { records, catalog }
    }

    /// Records in manifest order.
    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    /// Species names; position is the class id.
    pub fn catalog(&self) -> &[String] {
        &self.catalog
    }

    /// Number of records.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// True when there are no records.
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Class id of `species`.
    pub fn class_id(&self, species: &str) -> Option<usize> {
        self.catalog.iter().position(|s| s == species)
    }

    /// Record count per catalog class.
    pub fn class_counts(&self) -> Vec<usize> {
        let index = self.catalog_index();
        let mut counts = alloc::vec![0; self.catalog.len()];
        for r in &self.records {
            counts[index[r.species.as_str()]] += 1;
        }
        counts
    }

    /// Record indices grouped per catalog class, each in manifest order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let index = self.catalog_index();
        let mut groups = alloc::vec![Vec::new(); self.catalog.len()];
        for (i, r) in self.records.iter().enumerate() {
            groups[index[r.species.as_str()]].push(i);
        }
        groups
    }

    fn catalog_index(&self) -> BTreeMap<&str, usize> {
        self.catalog.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
    }
}

fn duplicate_ids(records: &[SampleRecord]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut dups = BTreeSet::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            dups.insert(r.id.clone());
        }
    }
    dups.into_iter().collect()
}

/// Filters applied at ingest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestOptions {
    /// Grades that are kept.
    pub allowed_qualities: Vec<Quality>,
    /// Species dropped outright (e.g. taxa the target region does not recognise).
    pub excluded_species: Vec<String>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { allowed_qualities: Quality::DEFAULT_ALLOWED.to_vec(), excluded_species: Vec::new() }
    }
}

/// A record dropped at ingest and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    /// Record id.
    pub id: String,
    /// Reason.
    pub reason: String,
}

/// Result of [`ingest`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ingested {
    /// Surviving records with a frequency-ordered catalog.
    pub manifest: DatasetManifest,
    /// Records rejected as invalid.
    pub rejected: Vec<Rejection>,
    /// Records dropped by the quality filter.
    pub quality_filtered: usize,
    /// Records dropped by the exclusion list.
    pub excluded: usize,
}

/// Filters records and builds the species catalog.
///
/// The catalog is ordered by descending record count, ties broken
/// lexicographically by scientific name.
pub fn ingest(records: Vec<SampleRecord>, opts: &IngestOptions) -> Result<Ingested, DatasetError> {
    let dups = duplicate_ids(&records);
    if !dups.is_empty() {
        return Err(DatasetError::DuplicateIds(dups));
    }
    let excluded_set: BTreeSet<&str> = opts.excluded_species.iter().map(|s| s.trim()).collect();
    let mut kept = Vec::with_capacity(records.len());
    let mut rejected = Vec::new();
    let (mut quality_filtered, mut excluded) = (0, 0);
    for mut r in records {
        let species = r.species.trim();
        if species.is_empty() {
            rejected.push(Rejection { id: r.id, reason: "empty species field".into() });
            continue;
        }
        if species.len() != r.species.len() {
            r.species = species.into();
        }
        if !opts.allowed_qualities.contains(&r.quality) {
            quality_filtered += 1;
            continue;
        }
        if excluded_set.contains(r.species.as_str()) {
            excluded += 1;
            continue;
        }
        kept.push(r);
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &kept {
        *counts.entry(r.species.as_str()).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    // BTreeMap iteration is already lexicographic; a stable sort keeps it for ties.
    ranked.sort_by_key(|&(_, n)| core::cmp::Reverse(n));
    let catalog = ranked.into_iter().map(|(s, _)| String::from(s)).collect();
    Ok(Ingested { manifest: DatasetManifest::from_parts_unchecked(kept, catalog), rejected, quality_filtered, excluded })
}

/// Keeps the `c` most frequent classes (the catalog prefix) and their records.
pub fn select_top_classes(manifest: &DatasetManifest, c: usize) -> DatasetManifest {
    if c >= manifest.catalog.len() {
        return manifest.clone();
    }
    let catalog: Vec<String> = manifest.catalog[..c].to_vec();
    let keep: BTreeSet<&str> = catalog.iter().map(String::as_str).collect();
    let records = manifest.records.iter().filter(|r| keep.contains(r.species.as_str())).cloned().collect();
    DatasetManifest::from_parts_unchecked(records, catalog)
}

/// Duplicates records of classes below `min_per_class` until each reaches it.
///
/// Sources are drawn uniformly with replacement from the class's own
/// records. A replica keeps every field of its source except the id, which
/// becomes `<id>#r<k>` with `k` counting replicas of that source. Original
/// records keep their order; replicas follow, grouped by class in catalog
/// order.
pub fn oversample(manifest: &DatasetManifest, min_per_class: usize, rng_seed: u64) -> Result<DatasetManifest, DatasetError> {
    let groups = manifest.indices_by_class();
    if let Some(empty) = groups.iter().position(Vec::is_empty) {
        return Err(DatasetError::EmptyClass(manifest.catalog[empty].clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut records = manifest.records.clone();
    let mut replica_counter: BTreeMap<usize, usize> = BTreeMap::new();
    let taken: BTreeSet<String> = manifest.records.iter().map(|r| r.id.clone()).collect();
    for group in &groups {
        for _ in group.len()..min_per_class {
            let src = group[rng.gen_range(0..group.len())];
            let k = replica_counter.entry(src).or_insert(0);
            let mut replica = manifest.records[src].clone();
            loop {
                *k += 1;
                replica.id = format!("{}#r{}", manifest.records[src].id, k);
                if !taken.contains(&replica.id) {
                    break;
                }
            }
            records.push(replica);
        }
    }
    Ok(DatasetManifest::from_parts_unchecked(records, manifest.catalog.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) fn rec(id: &str, species: &str, q: Quality) -> SampleRecord {
        SampleRecord {
            id: id.into(),
            species: species.into(),
            quality: q,
            modality: Modality::Audio,
            media_path: format!("{id}.wav"),
            license: "CC-BY".into(),
            origin_split: None,
        }
    }

    fn many(species: &str, n: usize) -> Vec<SampleRecord> {
        (0..n).map(|i| rec(&format!("{species}-{i}"), species, Quality::A)).collect()
    }

    #[test]
    fn quality_filter() {
        let out =
            ingest(vec![rec("1", "Parus major", Quality::A), rec("2", "Parus major", Quality::D)], &IngestOptions::default()).unwrap();
        assert_eq!(out.manifest.len(), 1);
        assert_eq!(out.manifest.records()[0].id, "1");
        assert_eq!(out.quality_filtered, 1);
    }

    #[test]
    fn empty_input() {
        let out = ingest(Vec::new(), &IngestOptions::default()).unwrap();
        assert!(out.manifest.is_empty());
        assert!(out.manifest.catalog().is_empty());
    }

    #[test]
    fn catalog_tie_break_is_lexicographic() {
        let mut rs = many("Sylvia atricapilla", 5);
        rs.extend(many("Erithacus rubecula", 2));
        rs.extend(many("Parus major", 5));
        let out = ingest(rs, &IngestOptions::default()).unwrap();
        assert_eq!(out.manifest.catalog(), ["Parus major", "Sylvia atricapilla", "Erithacus rubecula"]);
    }

    #[test]
    fn duplicates_and_empty_species() {
        let err = ingest(vec![rec("x", "A a", Quality::A), rec("x", "A a", Quality::B)], &IngestOptions::default());
        assert_eq!(err, Err(DatasetError::DuplicateIds(vec!["x".into()])));
        let out = ingest(vec![rec("1", "  ", Quality::A), rec("2", "A a", Quality::A)], &IngestOptions::default()).unwrap();
        assert_eq!(out.rejected.len(), 1);
        assert_eq!(out.rejected[0].id, "1");
        assert_eq!(out.manifest.len(), 1);
    }

    #[test]
    fn exclusion_list() {
        let opts = IngestOptions { excluded_species: vec!["Acanthis cabaret".into()], ..IngestOptions::default() };
        let out = ingest(vec![rec("1", "Acanthis cabaret", Quality::A), rec("2", "Parus major", Quality::A)], &opts).unwrap();
        assert_eq!(out.manifest.catalog(), ["Parus major"]);
        assert_eq!(out.excluded, 1);
    }

    #[test]
    fn top_classes() {
        let mut rs = many("a", 10);
        rs.extend(many("b", 9));
        rs.extend(many("c", 8));
        let m = ingest(rs, &IngestOptions::default()).unwrap().manifest;
        let top = select_top_classes(&m, 2);
        assert_eq!(top.catalog(), ["a", "b"]);
        assert_eq!(top.len(), 19);
        assert_eq!(select_top_classes(&m, 3), m);
        assert_eq!(select_top_classes(&m, 300), m);
    }

    #[test]
    fn top_256_of_300() {
        let rs: Vec<SampleRecord> = (0..300).map(|i| rec(&format!("{i}"), &format!("sp{i:03}"), Quality::A)).collect();
        let m = ingest(rs, &IngestOptions::default()).unwrap().manifest;
        assert_eq!(select_top_classes(&m, 256).catalog().len(), 256);
    }

    #[test]
    fn oversampling_floor() {
        let mut rs = many("big", 500);
        rs.extend(many("small", 2));
        let m = ingest(rs, &IngestOptions::default()).unwrap().manifest;
        let o = oversample(&m, 500, 42).unwrap();
        assert_eq!(o.class_counts(), vec![500, 500]);
        let small: Vec<&SampleRecord> = o.records().iter().filter(|r| r.species == "small").collect();
        for r in &small {
            assert!(r.id.starts_with("small-0") || r.id.starts_with("small-1"));
        }
        // already-large class untouched, byte for byte
        let big_before: Vec<&SampleRecord> = m.records().iter().filter(|r| r.species == "big").collect();
        let big_after: Vec<&SampleRecord> = o.records().iter().filter(|r| r.species == "big").collect();
        assert_eq!(big_before, big_after);
        assert_eq!(o, oversample(&m, 500, 42).unwrap());
        assert!(DatasetManifest::new(o.records().to_vec(), o.catalog().to_vec()).is_ok());
    }

    #[test]
    fn oversampling_empty_class_errors() {
        let m = DatasetManifest::new(many("a", 3), vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(oversample(&m, 5, 0), Err(DatasetError::EmptyClass("b".into())));
    }

    #[test]
    fn manifest_validation() {
        assert!(matches!(DatasetManifest::new(many("a", 1), vec!["b".into()]), Err(DatasetError::UnknownSpecies { .. })));
    }
}

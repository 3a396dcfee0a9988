//! Synthetic corpus generation with controllable class separation and
//! temporal drift, dataset-manifest handling, and corpus characterization
//! tables.
//!
//! Each generated app's call-graph file realizes a seeded random walk
//! through synthesized method signatures whose abstractions follow the
//! app's class profile, so the full parsing/abstraction pipeline is
//! exercised end to end rather than bypassed. Signature vocabularies are
//! keyed per (state, epoch): apps of the same epoch share raw calls, and
//! the raw vocabulary rotates between epochs the way real API usage
//! drifts.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::abstraction::{Mode, PackageCatalog, OBFUSCATED, SELF_DEFINED};
use crate::callgraph::{parse_call_graph, CallGraph};
use crate::derive_seed;
use crate::learn::Label;
use crate::markov::StateSpace;
use crate::pca::fit_pca;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("duplicate app id {0:?}")]
    DuplicateAppId(String),
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("manifest references missing call-graph files: {0:?}")]
    MissingFiles(Vec<PathBuf>),
}

/// One corpus entry: where an app's call graph lives and what we know
/// about it. Paths are stored relative to the manifest file.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub app_id: String,
    pub label: Label,
    pub epoch: i32,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    rows: Vec<ManifestRow>,
    base_dir: PathBuf,
}

impl Manifest {
    pub fn rows(&self) -> &[ManifestRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    /// Absolute location of a row's call-graph file.
    pub fn resolve(&self, row: &ManifestRow) -> PathBuf {
        self.base_dir.join(&row.path)
    }

    /// Rows restricted to one epoch.
    pub fn epoch_rows(&self, epoch: i32) -> Vec<&ManifestRow> {
        self.rows.iter().filter(|r| r.epoch == epoch).collect()
    }

    /// Distinct epochs in ascending order.
    pub fn epochs(&self) -> Vec<i32> {
        let set: BTreeSet<i32> = self.rows.iter().map(|r| r.epoch).collect();
        set.into_iter().collect()
    }

    /// Validated load: unique app ids, known labels, and every referenced
    /// call-graph file present (missing ones are all listed).
    pub fn load(path: &Path) -> Result<Manifest, ManifestError> {
        let base_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| match e.kind() {
                csv::ErrorKind::Io(_) => ManifestError::Io {
                    path: path.to_path_buf(),
                    source: std::io::Error::other(e.to_string()),
                },
                _ => ManifestError::Csv(e),
            })?;
        let mut rows = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let bad = |message: String| ManifestError::BadRow {
                row: i + 2, // header is line 1
                message,
            };
            if record.len() != 4 {
                return Err(bad(format!("expected 4 columns, got {}", record.len())));
            }
            let app_id = record[0].to_string();
            if !seen.insert(app_id.clone()) {
                return Err(ManifestError::DuplicateAppId(app_id));
            }
            let label: Label = record[1].parse().map_err(bad)?;
            let epoch: i32 = record[2]
                .parse()
                .map_err(|_| bad(format!("bad epoch {:?}", &record[2])))?;
            rows.push(ManifestRow {
                app_id,
                label,
                epoch,
                path: record[3].to_string(),
            });
        }

        let manifest = Manifest { rows, base_dir };
        let missing: Vec<PathBuf> = manifest
            .rows
            .iter()
            .map(|r| manifest.resolve(r))
            .filter(|p| !p.is_file())
            .collect();
        if !missing.is_empty() {
            return Err(ManifestError::MissingFiles(missing));
        }
        Ok(manifest)
    }

    pub fn write(&self, path: &Path) -> Result<(), ManifestError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| ManifestError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        })?;
        w.write_record(["app_id", "label", "epoch", "path"])?;
        for r in &self.rows {
            w.write_record([
                r.app_id.as_str(),
                &r.label.to_string(),
                &r.epoch.to_string(),
                r.path.as_str(),
            ])?;
        }
        w.flush().map_err(|e| ManifestError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Ok(())
    }
}

/// A ground-truth transition matrix over a state space; every row sums
/// to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    rows: Vec<Vec<f64>>,
}

impl Profile {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, GenerateError> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != rows.len() {
                return Err(GenerateError::InvalidSpec(format!(
                    "profile row {i} has {} entries for {} states",
                    row.len(),
                    rows.len()
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(GenerateError::InvalidSpec(format!(
                    "profile row {i} is not a probability distribution (sum {sum})"
                )));
            }
        }
        Ok(Profile { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    fn sample_next(&self, from: usize, rng: &mut ChaCha8Rng) -> usize {
        let row = &self.rows[from];
        let u: f64 = rng.random::<f64>();
        let mut acc = 0.0;
        for (i, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        row.len() - 1 // rounding tail
    }
}

/// Built-in profile shapes for the generator CLI and the test corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// Disjoint transition supports: trivially separable classes.
    Separable,
    /// Identical profiles: an indistinguishability null.
    Null,
    /// Identical base profiles; the malware signal lives entirely in the
    /// per-epoch drift term, so detectors trained on one epoch decay on
    /// later ones.
    Drift,
    /// Two independent sparse random profiles.
    Random,
}

impl std::str::FromStr for ProfileKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "separable" => Ok(ProfileKind::Separable),
            "null" => Ok(ProfileKind::Null),
            "drift" => Ok(ProfileKind::Drift),
            "random" => Ok(ProfileKind::Random),
            other => Err(format!(
                "unknown profile kind {other:?} (expected separable, null, drift or random)"
            )),
        }
    }
}

/// (benign, malware) ground-truth profiles for a state space.
pub fn build_profiles(kind: ProfileKind, space: &StateSpace, seed: u64) -> (Profile, Profile) {
    let n = space.len();
    let start = space.index_of(SELF_DEFINED).expect("specials always present");
    let specials = [
        start,
        space.index_of(OBFUSCATED).expect("specials always present"),
    ];
    let normal: Vec<usize> = (0..n).filter(|i| !specials.contains(i)).collect();
    let half = normal.len() / 2;
    let group_a: Vec<usize> = normal[..half].to_vec();
    let group_b: Vec<usize> = normal[half..].to_vec();

    // rows over {start} ∪ group: from start go anywhere in the group; from
    // a group state, 30% back to start, 70% within the group
    let group_profile = |group: &[usize]| {
        let mut rows = vec![vec![0.0; n]; n];
        for (i, row) in rows.iter_mut().enumerate() {
            if i == start {
                for &g in group {
                    row[g] = 1.0 / group.len() as f64;
                }
            } else if group.contains(&i) {
                row[start] = 0.3;
                for &g in group {
                    row[g] += 0.7 / group.len() as f64;
                }
            } else {
                row[i] = 1.0; // never visited; self-loop filler
            }
        }
        normalize_rows(&mut rows);
        Profile { rows }
    };

    match kind {
        ProfileKind::Separable => (group_profile(&group_a), group_profile(&group_b)),
        ProfileKind::Null => (group_profile(&group_a), group_profile(&group_a)),
        ProfileKind::Drift => (group_profile(&group_a), group_profile(&group_a)),
        ProfileKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5ead));
            (random_profile(n, &mut rng), random_profile(n, &mut rng))
        }
    }
}

fn random_profile(n: usize, rng: &mut ChaCha8Rng) -> Profile {
    let mut rows = vec![vec![0.0; n]; n];
    for row in rows.iter_mut() {
        let targets = distinct_targets(rng, n, 3.min(n));
        let weights: Vec<f64> = targets.iter().map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for (&t, w) in targets.iter().zip(weights) {
            row[t] = w / total;
        }
    }
    normalize_rows(&mut rows);
    Profile { rows }
}

fn distinct_targets(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let t = rng.random_range(0..n);
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

fn normalize_rows(rows: &mut [Vec<f64>]) {
    for row in rows {
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            for p in row.iter_mut() {
                *p /= sum;
            }
        }
    }
}

/// Everything needed to synthesize a corpus.
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub mode: Mode,
    pub benign_profile: Profile,
    pub malware_profile: Profile,
    /// Apps per class per epoch.
    pub apps_per_class: usize,
    /// Inclusive range of distinct-signature budget per app.
    pub nodes_range: (usize, usize),
    /// Inclusive range of walk lengths (edge lines) per app.
    pub edges_range: (usize, usize),
    pub epochs: Vec<i32>,
    /// Per-epoch perturbation magnitude applied to the malware profile.
    pub drift: f64,
    /// Fraction of apps whose manifest label is flipped.
    pub label_noise: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    fn validate(&self, space: &StateSpace) -> Result<(), GenerateError> {
        let n = space.len();
        if self.benign_profile.len() != n || self.malware_profile.len() != n {
            return Err(GenerateError::InvalidSpec(format!(
                "profiles sized {}/{} for a {}-state space",
                self.benign_profile.len(),
                self.malware_profile.len(),
                n
            )));
        }
        if self.apps_per_class == 0 {
            return Err(GenerateError::InvalidSpec("apps_per_class is 0".into()));
        }
        if self.epochs.is_empty() {
            return Err(GenerateError::InvalidSpec("no epochs".into()));
        }
        if self.nodes_range.0 > self.nodes_range.1 || self.nodes_range.0 == 0 {
            return Err(GenerateError::InvalidSpec("bad nodes range".into()));
        }
        if self.edges_range.0 > self.edges_range.1 || self.edges_range.0 == 0 {
            return Err(GenerateError::InvalidSpec("bad edges range".into()));
        }
        if !(0.0..=1.0).contains(&self.drift) {
            return Err(GenerateError::InvalidSpec("drift outside [0, 1]".into()));
        }
        if !(0.0..0.5).contains(&self.label_noise) && self.label_noise != 0.0 {
            return Err(GenerateError::InvalidSpec("label_noise outside [0, 0.5)".into()));
        }
        Ok(())
    }
}

/// The malware profile as realized at epoch index `t`: rows of
/// (1-δ)·P + δ·U_t, renormalized, with U_t a sparse random stochastic
/// matrix drawn per epoch from the corpus seed.
fn drifted_profile(base: &Profile, drift: f64, seed: u64, epoch_idx: usize) -> Profile {
    if drift == 0.0 {
        return base.clone();
    }
    let n = base.len();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xd21f7 + epoch_idx as u64));
    let u = random_profile(n, &mut rng);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let row: Vec<f64> = base
            .row(i)
            .iter()
            .zip(u.row(i))
            .map(|(&p, &q)| (1.0 - drift) * p + drift * q)
            .collect();
        rows.push(row);
    }
    normalize_rows(&mut rows);
    Profile { rows }
}

/// Synthesized method signature for one visit of `state` at `epoch_idx`,
/// rendered as an edge-line side. Slot indices cycle through the per-state
/// vocabulary pool.
struct Vocab<'a> {
    space: &'a StateSpace,
    /// family name -> package prefixes, for family mode.
    family_packages: HashMap<String, Vec<String>>,
}

impl<'a> Vocab<'a> {
    fn new(space: &'a StateSpace, catalog: &PackageCatalog) -> Self {
        let mut family_packages = HashMap::new();
        if space.mode() == Mode::Family {
            for name in space.names() {
                let pkgs: Vec<String> = catalog
                    .packages_of_family(name)
                    .into_iter()
                    .map(String::from)
                    .collect();
                family_packages.insert(name.clone(), pkgs);
            }
        }
        Vocab {
            space,
            family_packages,
        }
    }

    fn signature(&self, state: usize, epoch_idx: usize, slot: usize) -> String {
        let name = &self.space.names()[state];
        if name == SELF_DEFINED {
            return format!("com.gen{epoch_idx}.mod{slot}.core.Worker: void run()");
        }
        if name == OBFUSCATED {
            return format!("o{epoch_idx}.g{slot}.a.b: void c()");
        }
        let prefix = match self.space.mode() {
            Mode::Package => name.as_str(),
            Mode::Family => {
                let pkgs = &self.family_packages[name];
                pkgs[slot % pkgs.len()].as_str()
            }
        };
        // Entries like android.R extend into the class name: synthesize
        // methods on that class instead of classes under it.
        let last = prefix.rsplit('.').next().unwrap_or(prefix);
        if last.chars().next().is_some_and(|c| c.is_ascii_uppercase()) {
            format!("{prefix}: void m{epoch_idx}x{slot}()")
        } else {
            format!("{prefix}.C{epoch_idx}x{slot}: void m{slot}()")
        }
    }
}

/// Generates the corpus under `out_dir` (call-graph files in `apps/`, a
/// `manifest.csv` beside them) and returns the manifest. Byte-identical
/// for a fixed spec regardless of parallelism.
pub fn generate_corpus(
    spec: &GeneratorSpec,
    catalog: &PackageCatalog,
    out_dir: &Path,
) -> Result<Manifest, GenerateError> {
    let space = StateSpace::from_catalog(catalog, spec.mode);
    spec.validate(&space)?;
    let io_err = |path: &Path| {
        let p = path.to_path_buf();
        move |source: std::io::Error| GenerateError::Io { path: p, source }
    };
    let apps_dir = out_dir.join("apps");
    std::fs::create_dir_all(&apps_dir).map_err(io_err(&apps_dir))?;

    let vocab = Vocab::new(&space, catalog);
    let start = space.index_of(SELF_DEFINED).expect("specials always present");

    let epoch_profiles: Vec<Profile> = (0..spec.epochs.len())
        .map(|t| drifted_profile(&spec.malware_profile, spec.drift, spec.seed, t))
        .collect();

    struct Slot {
        epoch_idx: usize,
        class: Label,
        index: usize,
    }
    let mut slots = Vec::new();
    for epoch_idx in 0..spec.epochs.len() {
        for class in [Label::Benign, Label::Malware] {
            for index in 0..spec.apps_per_class {
                slots.push(Slot {
                    epoch_idx,
                    class,
                    index,
                });
            }
        }
    }

    let rows: Vec<Result<ManifestRow, GenerateError>> = slots
        .par_iter()
        .map(|slot| {
            let epoch = spec.epochs[slot.epoch_idx];
            let salt = ((slot.epoch_idx as u64) << 34)
                | ((slot.class.is_malware() as u64) << 33)
                | slot.index as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, salt));

            let n_edges =
                rng.random_range(spec.edges_range.0..=spec.edges_range.1);
            let n_nodes =
                rng.random_range(spec.nodes_range.0..=spec.nodes_range.1);
            let pool = (n_nodes / space.len()).max(1);
            let profile = if slot.class.is_malware() {
                &epoch_profiles[slot.epoch_idx]
            } else {
                &spec.benign_profile
            };

            let mut visits = vec![0usize; space.len()];
            let mut state = start;
            let mut slot_of = |state: usize, visits: &mut Vec<usize>| {
                let s = visits[state] % pool;
                visits[state] += 1;
                s
            };
            let mut text = String::new();
            let mut current_sig = vocab.signature(state, slot.epoch_idx, slot_of(state, &mut visits));
            for _ in 0..n_edges {
                let next = profile.sample_next(state, &mut rng);
                let next_sig = vocab.signature(next, slot.epoch_idx, slot_of(next, &mut visits));
                text.push_str(&current_sig);
                text.push_str(" -> ");
                text.push_str(&next_sig);
                text.push('\n');
                state = next;
                current_sig = next_sig;
            }

            let flip = spec.label_noise > 0.0 && rng.random_bool(spec.label_noise);
            let label = match (slot.class, flip) {
                (l, false) => l,
                (Label::Benign, true) => Label::Malware,
                (Label::Malware, true) => Label::Benign,
            };

            let class_char = if slot.class.is_malware() { 'm' } else { 'b' };
            let app_id = format!("app-{epoch}-{class_char}{:05}", slot.index);
            let rel_path = format!("apps/{app_id}.cg");
            let file_path = out_dir.join(&rel_path);
            std::fs::write(&file_path, text).map_err(|source| GenerateError::Io {
                path: file_path.clone(),
                source,
            })?;
            Ok(ManifestRow {
                app_id,
                label,
                epoch,
                path: rel_path,
            })
        })
        .collect();

    let rows: Vec<ManifestRow> = rows.into_iter().collect::<Result<_, _>>()?;
    let manifest = Manifest {
        rows,
        base_dir: out_dir.to_path_buf(),
    };
    let manifest_path = out_dir.join("manifest.csv");
    manifest.write(&manifest_path).map_err(|e| GenerateError::Io {
        path: manifest_path,
        source: std::io::Error::other(e.to_string()),
    })?;
    Ok(manifest)
}

/// Plot-ready corpus measurements.
#[derive(Debug, Clone, Default)]
pub struct Characterization {
    /// (app_id, label, epoch, distinct callee count)
    pub unique_calls: Vec<(String, Label, i32, usize)>,
    /// (dataset tag, app_id, family, fraction of callee occurrences)
    pub family_fractions: Vec<(String, String, String, f64)>,
    /// (app_id, label, epoch, pc1, pc2)
    pub pca_scatter: Vec<(String, Label, i32, f64, f64)>,
}

/// Per-app unique-call counts (CDF-ready), per-family call fractions, and
/// two-component PCA coordinates in family mode. Unparsable apps are
/// skipped with a warning.
pub fn characterize_corpus(
    manifest: &Manifest,
    catalog: &PackageCatalog,
) -> Result<Characterization, ManifestError> {
    let mut out = Characterization::default();
    let families = catalog.all_family_names();
    let space = StateSpace::from_catalog(catalog, Mode::Family);

    let mut feature_rows: Vec<Vec<f64>> = Vec::new();
    let mut feature_meta: Vec<(String, Label, i32)> = Vec::new();

    for row in manifest.rows() {
        let path = manifest.resolve(row);
        let text = std::fs::read_to_string(&path).map_err(|source| ManifestError::Io {
            path: path.clone(),
            source,
        })?;
        let graph = match parse_call_graph(&text, &row.app_id) {
            Ok(g) => g,
            Err(e) => {
                log::warn!("characterize: skipping {}: {e}", row.app_id);
                continue;
            }
        };

        let unique: BTreeSet<_> = graph.edges().map(|(_, callee)| callee.clone()).collect();
        out.unique_calls
            .push((row.app_id.clone(), row.label, row.epoch, unique.len()));

        let dataset = format!("{}-{}", row.label, row.epoch);
        let total = graph.edge_count();
        let mut per_family: HashMap<&str, usize> = HashMap::new();
        for (_, callee) in graph.edges() {
            let fam = catalog.raw_family(callee);
            let slot = families
                .iter()
                .find(|f| **f == fam)
                .map(|f| f.as_str())
                .unwrap_or(SELF_DEFINED);
            *per_family.entry(slot).or_insert(0) += 1;
        }
        for fam in &families {
            let count = per_family.get(fam.as_str()).copied().unwrap_or(0);
            let fraction = if total > 0 { count as f64 / total as f64 } else { 0.0 };
            out.family_fractions
                .push((dataset.clone(), row.app_id.clone(), fam.clone(), fraction));
        }

        if let Ok(fv) = crate::pipeline::featurize_graph(&graph, catalog, &space, Default::default())
        {
            feature_rows.push(fv.values);
            feature_meta.push((row.app_id.clone(), row.label, row.epoch));
        }
    }

    if feature_rows.len() >= 2 {
        match fit_pca(&feature_rows, 2) {
            Ok(pca) => {
                for (row, (app_id, label, epoch)) in feature_rows.iter().zip(feature_meta) {
                    let z = pca.transform(row).expect("training row width");
                    out.pca_scatter.push((app_id, label, epoch, z[0], z[1]));
                }
            }
            Err(e) => log::warn!("characterize: PCA skipped: {e}"),
        }
    } else {
        log::warn!("characterize: fewer than 2 apps, PCA scatter skipped");
    }

    Ok(out)
}

//! Backend manifests and plugin loading.
//!
//! A manifest is a TOML file with one `[[backend]]` table per model:
//!
//! ```toml
//! [[backend]]
//! role = "audio-classifier"   # gate | audio-classifier | detector | image-classifier
//! name = "passt-s"
//! version = "2024.1"
//! modality = "audio"
//! input_shape = [1, 128, 1000]
//! catalog = "species.txt"     # classifiers only, relative to the manifest
//! plugin = "exec:python3 infer.py"
//! ```
//!
//! Plugin locators:
//!
//! | locator               | roles                        |
//! |-----------------------|------------------------------|
//! | `stub:constant:<p>`   | gate                         |
//! | `stub:energy:<rms>`   | gate                         |
//! | `stub:onehot:<k>`     | classifiers                  |
//! | `stub:band-energy`    | classifiers                  |
//! | `stub:full-frame[:c]` | detector                     |
//! | `exec:<command>`      | all                          |
//!
//! An `exec` model backend receives `shape d1,d2,...\n` followed by the
//! tensor as little-endian f32 on stdin and answers one line of
//! whitespace-separated probabilities. An `exec` detector receives
//! `image <w>,<h>\n` followed by RGB bytes and answers one
//! `x0 y0 w h confidence class_id` line per box.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use serde::Deserialize;
use zwitscher_core::dataset::Detection;
use zwitscher_core::engine::stubs::{BandEnergyClassifier, ConstantBackend, EnergyGate, FullFrameDetector};
use zwitscher_core::engine::{BackendError, BackendIdentity, ModelBackend, ModelInput, ObjectDetector, RgbImage};
use zwitscher_core::{BoundingBox, Modality};

use crate::formats;
use crate::store::BackendInfo;

/// Eight common central European garden birds, used with stub backends.
pub const DEMO_CATALOG: [&str; 8] = [
    "Turdus merula",
    "Parus major",
    "Erithacus rubecula",
    "Fringilla coelebs",
    "Cyanistes caeruleus",
    "Passer domesticus",
    "Sylvia atricapilla",
    "Phylloscopus collybita",
];

/// RMS at which the stub energy gate reaches p = 0.8.
pub const STUB_ENERGY_LEVEL: f64 = 0.05;

pub fn demo_catalog() -> Vec<String> {
    DEMO_CATALOG.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Gate,
    AudioClassifier,
    Detector,
    ImageClassifier,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Gate => "gate",
            Role::AudioClassifier => "audio-classifier",
            Role::Detector => "detector",
            Role::ImageClassifier => "image-classifier",
        }
    }

    fn modality(&self) -> Modality {
        match self {
            Role::Gate | Role::AudioClassifier => Modality::Audio,
            Role::Detector | Role::ImageClassifier => Modality::Image,
        }
    }

    fn is_classifier(&self) -> bool {
        matches!(self, Role::AudioClassifier | Role::ImageClassifier)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSpec {
    pub role: Role,
    pub name: String,
    pub version: String,
    pub modality: Modality,
    #[serde(default)]
    pub input_shape: Vec<usize>,
    pub catalog: Option<PathBuf>,
    pub plugin: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendManifest {
    #[serde(default)]
    pub backend: Vec<BackendSpec>,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Format(#[from] formats::FormatError),
}

fn invalid(msg: impl Into<String>) -> ManifestError {
    ManifestError::Invalid(msg.into())
}

pub type DynBackend = Box<dyn ModelBackend + Send>;
pub type DynDetector = Box<dyn ObjectDetector + Send>;

pub struct AudioBackends {
    pub gate: DynBackend,
    pub classifier: DynBackend,
    pub catalog: Vec<String>,
}

pub struct ImageBackends {
    pub detector: DynDetector,
    pub classifier: DynBackend,
    pub catalog: Vec<String>,
}

/// Everything a monitor run needs, validated.
pub struct Backends {
    pub audio: Option<AudioBackends>,
    pub image: Option<ImageBackends>,
    pub info: Vec<BackendInfo>,
}

impl Backends {
    /// Energy gate, band-energy classifiers and a full-frame detector over
    /// [`DEMO_CATALOG`].
    pub fn stubs() -> Self {
        let n = DEMO_CATALOG.len();
        let gate = EnergyGate::new(STUB_ENERGY_LEVEL).expect("positive level");
        let info = vec![
            info(Role::Gate, gate.identity()),
            info(Role::AudioClassifier, BandEnergyClassifier::new(n).identity()),
            info(Role::Detector, FullFrameDetector::default().identity()),
            info(Role::ImageClassifier, BandEnergyClassifier::new(n).identity()),
        ];
        Self {
            audio: Some(AudioBackends {
                gate: Box::new(gate),
                classifier: Box::new(BandEnergyClassifier::new(n)),
                catalog: demo_catalog(),
            }),
            image: Some(ImageBackends {
                detector: Box::new(FullFrameDetector::default()),
                classifier: Box::new(BandEnergyClassifier::new(n)),
                catalog: demo_catalog(),
            }),
            info,
        }
    }

    /// Loads and validates a manifest file.
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = formats::read_text(path)?;
        let manifest: BackendManifest = toml::from_str(&text)?;
        Self::from_manifest(&manifest, path.parent().unwrap_or(Path::new(".")))
    }

    /// Builds backends, resolving catalog paths against `base`.
    pub fn from_manifest(m: &BackendManifest, base: &Path) -> Result<Self, ManifestError> {
        let mut by_role: Vec<(Role, &BackendSpec)> = Vec::new();
        for spec in &m.backend {
            if by_role.iter().any(|(r, _)| *r == spec.role) {
                return Err(invalid(format!("role {} declared twice", spec.role.as_str())));
            }
            if spec.modality != spec.role.modality() {
                return Err(invalid(format!("{}: role {} needs modality {}", spec.name, spec.role.as_str(), spec.role.modality())));
            }
            if spec.role.is_classifier() != spec.catalog.is_some() {
                return Err(invalid(format!("{}: a catalog is required for classifiers and only for them", spec.name)));
            }
            by_role.push((spec.role, spec));
        }
        let find = |r: Role| by_role.iter().find(|(role, _)| *role == r).map(|(_, s)| *s);
        let pair = |a: Role, b: Role| match (find(a), find(b)) {
            (Some(x), Some(y)) => Ok(Some((x, y))),
            (None, None) => Ok(None),
            _ => Err(invalid(format!("{} and {} must be declared together", a.as_str(), b.as_str()))),
        };
        let mut info = Vec::new();
        let audio = match pair(Role::Gate, Role::AudioClassifier)? {
            Some((g, c)) => {
                let catalog = load_catalog(c, base)?;
                let gate = model(g, 1)?;
                let classifier = model(c, catalog.len())?;
                info.push(BackendInfo { role: g.role.as_str().into(), modality: g.modality, identity: gate.identity() });
                info.push(BackendInfo { role: c.role.as_str().into(), modality: c.modality, identity: classifier.identity() });
                Some(AudioBackends { gate, classifier, catalog })
            }
            None => None,
        };
        let image = match pair(Role::Detector, Role::ImageClassifier)? {
            Some((d, c)) => {
                let catalog = load_catalog(c, base)?;
                let detector = detector(d)?;
                let classifier = model(c, catalog.len())?;
                info.push(BackendInfo { role: d.role.as_str().into(), modality: d.modality, identity: detector.identity() });
                info.push(BackendInfo { role: c.role.as_str().into(), modality: c.modality, identity: classifier.identity() });
                Some(ImageBackends { detector, classifier, catalog })
            }
            None => None,
        };
        if audio.is_none() && image.is_none() {
            return Err(invalid("manifest declares no complete pipeline"));
        }
        Ok(Self { audio, image, info })
    }
}

fn info(role: Role, identity: BackendIdentity) -> BackendInfo {
    BackendInfo { role: role.as_str().into(), modality: role.modality(), identity }
}

fn load_catalog(spec: &BackendSpec, base: &Path) -> Result<Vec<String>, ManifestError> {
    let path = base.join(spec.catalog.as_ref().expect("classifier has a catalog"));
    let catalog = formats::parse_catalog(&formats::read_text(&path)?)?;
    if catalog.is_empty() {
        return Err(invalid(format!("{}: catalog {} is empty", spec.name, path.display())));
    }
    Ok(catalog)
}

fn parse_num<T: std::str::FromStr>(spec: &BackendSpec, s: &str) -> Result<T, ManifestError> {
    s.parse().map_err(|_| invalid(format!("{}: bad plugin argument {s:?}", spec.name)))
}

/// Model backend for a gate (`outputs` = 1) or classifier.
fn model(spec: &BackendSpec, outputs: usize) -> Result<DynBackend, ManifestError> {
    let gate = spec.role == Role::Gate;
    let inner: DynBackend = match spec.plugin.split_once(':') {
        Some(("exec", cmd)) => Box::new(ExecBackend::new(cmd, outputs)),
        Some(("stub", rest)) => {
            let (kind, arg) = rest.split_once(':').unwrap_or((rest, ""));
            match (kind, gate) {
                ("constant", true) => {
                    let p: f32 = parse_num(spec, arg)?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(invalid(format!("{}: constant {p} outside [0, 1]", spec.name)));
                    }
                    Box::new(ConstantBackend::p_bird(p))
                }
                ("energy", true) => Box::new(EnergyGate::new(parse_num(spec, arg)?).map_err(|e| invalid(format!("{}: {e}", spec.name)))?),
                ("onehot", false) => {
                    let k: usize = parse_num(spec, arg)?;
                    if k >= outputs {
                        return Err(invalid(format!("{}: one-hot index {k} outside a {outputs}-class catalog", spec.name)));
                    }
                    Box::new(ConstantBackend::one_hot(k, outputs))
                }
                ("band-energy", false) => Box::new(BandEnergyClassifier::new(outputs)),
                _ => return Err(invalid(format!("{}: plugin {:?} does not fit role {}", spec.name, spec.plugin, spec.role.as_str()))),
            }
        }
        _ => return Err(invalid(format!("{}: unknown plugin locator {:?}", spec.name, spec.plugin))),
    };
    if let Some(n) = inner.output_len() {
        if n != outputs {
            return Err(invalid(format!("{}: backend yields {n} outputs, expected {outputs}", spec.name)));
        }
    }
    Ok(Box::new(Declared { identity: BackendIdentity::new(&spec.name, &spec.version), shape: spec.input_shape.clone(), inner }))
}

fn detector(spec: &BackendSpec) -> Result<DynDetector, ManifestError> {
    let inner: DynDetector = match spec.plugin.split_once(':') {
        Some(("exec", cmd)) => Box::new(ExecDetector { command: cmd.to_string() }),
        Some(("stub", "full-frame")) => Box::new(FullFrameDetector::default()),
        Some(("stub", rest)) if rest.starts_with("full-frame:") => {
            Box::new(FullFrameDetector::new(parse_num(spec, &rest["full-frame:".len()..])?))
        }
        _ => return Err(invalid(format!("{}: plugin {:?} does not fit role detector", spec.name, spec.plugin))),
    };
    Ok(Box::new(DeclaredDetector { identity: BackendIdentity::new(&spec.name, &spec.version), inner }))
}

/// A backend reporting its manifest identity and declared input shape.
struct Declared {
    identity: BackendIdentity,
    shape: Vec<usize>,
    inner: DynBackend,
}

impl ModelBackend for Declared {
    fn identity(&self) -> BackendIdentity {
        self.identity.clone()
    }

    fn input_shape(&self) -> &[usize] {
        &self.shape
    }

    fn output_len(&self) -> Option<usize> {
        self.inner.output_len()
    }

    fn infer(&mut self, input: &ModelInput<'_>) -> Result<Vec<f32>, BackendError> {
        self.inner.infer(input)
    }
}

struct DeclaredDetector {
    identity: BackendIdentity,
    inner: DynDetector,
}

impl ObjectDetector for DeclaredDetector {
    fn identity(&self) -> BackendIdentity {
        self.identity.clone()
    }

    fn detect(&mut self, image: &RgbImage) -> Result<Vec<Detection>, BackendError> {
        self.inner.detect(image)
    }
}

/// Runs `sh -c command`, feeding `input` and returning stdout.
fn run_process(command: &str, input: &[u8]) -> Result<String, BackendError> {
    let fail = |what: &str, e: std::io::Error| BackendError::Failed(format!("{command}: {what}: {e}"));
    let mut child = Command::new("sh")
        .args(["-c", command])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| fail("spawn", e))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let mut stdout = child.stdout.take().expect("piped stdout");
    let (written, out) = std::thread::scope(|s| {
        let writer = s.spawn(move || stdin.write_all(input));
        let mut out = Vec::new();
        let read = stdout.read_to_end(&mut out);
        (writer.join().expect("writer thread"), read.map(|_| out))
    });
    let status = child.wait().map_err(|e| fail("wait", e))?;
    let out = out.map_err(|e| fail("read", e))?;
    if !status.success() {
        let mut err = String::new();
        if let Some(mut e) = child.stderr.take() {
            let _ = e.read_to_string(&mut err);
        }
        return Err(BackendError::Failed(format!("{command}: exit {status}: {}", err.trim())));
    }
    // A model that answers without reading all input is fine; a broken pipe is not an error then.
    if let Err(e) = written {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            return Err(fail("write", e));
        }
    }
    String::from_utf8(out).map_err(|e| BackendError::BadOutput(format!("{command}: {e}")))
}

/// Model backend implemented by an external process.
#[derive(Debug, Clone)]
pub struct ExecBackend {
    command: String,
    outputs: usize,
}

impl ExecBackend {
    pub fn new(command: &str, outputs: usize) -> Self {
        Self { command: command.to_string(), outputs }
    }
}

impl ModelBackend for ExecBackend {
    fn identity(&self) -> BackendIdentity {
        BackendIdentity::new(format!("exec:{}", self.command), "external")
    }

    fn input_shape(&self) -> &[usize] {
        &[]
    }

    fn output_len(&self) -> Option<usize> {
        Some(self.outputs)
    }

    fn infer(&mut self, input: &ModelInput<'_>) -> Result<Vec<f32>, BackendError> {
        let dims: Vec<String> = input.shape.iter().map(|d| d.to_string()).collect();
        let mut msg = format!("shape {}\n", dims.join(",")).into_bytes();
        msg.reserve(input.tensor.len() * 4);
        for v in input.tensor {
            msg.extend_from_slice(&v.to_le_bytes());
        }
        let out = run_process(&self.command, &msg)?;
        let line = out.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        line.split_whitespace().map(|t| t.parse::<f32>().map_err(|e| BackendError::BadOutput(format!("{t:?}: {e}")))).collect()
    }
}

/// Object detector implemented by an external process.
#[derive(Debug, Clone)]
pub struct ExecDetector {
    command: String,
}

impl ObjectDetector for ExecDetector {
    fn identity(&self) -> BackendIdentity {
        BackendIdentity::new(format!("exec:{}", self.command), "external")
    }

    fn detect(&mut self, image: &RgbImage) -> Result<Vec<Detection>, BackendError> {
        let mut msg = format!("image {},{}\n", image.width(), image.height()).into_bytes();
        msg.extend_from_slice(image.as_bytes());
        let out = run_process(&self.command, &msg)?;
        out.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let f: Vec<&str> = l.split_whitespace().collect();
                let bad = || BackendError::BadOutput(format!("detection line {l:?}"));
                if f.len() != 6 {
                    return Err(bad());
                }
                let n = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
                Ok(Detection {
                    bbox: BoundingBox::new(n(0)?, n(1)?, n(2)?, n(3)?),
                    confidence: n(4)?,
                    class_id: f[5].parse().map_err(|_| bad())?,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(role: Role, plugin: &str) -> BackendSpec {
        BackendSpec {
            role,
            name: format!("{}-model", role.as_str()),
            version: "1".into(),
            modality: role.modality(),
            input_shape: Vec::new(),
            catalog: role.is_classifier().then(|| PathBuf::from("catalog.txt")),
            plugin: plugin.into(),
        }
    }

    fn dir_with_catalog(n: usize) -> tempfile::TempDir {
        let d = tempfile::tempdir().unwrap();
        let names: Vec<String> = (0..n).map(|i| format!("Species {i}")).collect();
        std::fs::write(d.path().join("catalog.txt"), formats::format_catalog(&names)).unwrap();
        d
    }

    #[test]
    fn parses_toml() {
        let m: BackendManifest = toml::from_str(
            r#"
            [[backend]]
            role = "gate"
            name = "act"
            version = "0.1"
            modality = "audio"
            input_shape = [1, 64, 63]
            plugin = "stub:constant:0.9"
            "#,
        )
        .unwrap();
        assert_eq!(m.backend[0].role, Role::Gate);
        assert_eq!(m.backend[0].input_shape, vec![1, 64, 63]);
    }

    #[test]
    fn builds_audio_pair_with_identities() {
        let d = dir_with_catalog(3);
        let m = BackendManifest { backend: vec![spec(Role::Gate, "stub:energy:0.1"), spec(Role::AudioClassifier, "stub:onehot:2")] };
        let b = Backends::from_manifest(&m, d.path()).unwrap();
        let audio = b.audio.unwrap();
        assert_eq!(audio.catalog.len(), 3);
        assert_eq!(audio.classifier.output_len(), Some(3));
        assert_eq!(b.info[0].identity, BackendIdentity::new("gate-model", "1"));
        assert!(b.image.is_none());
    }

    #[test]
    fn rejects_bad_manifests() {
        let d = dir_with_catalog(3);
        let cases = [
            vec![spec(Role::Gate, "stub:energy:0.1")],
            vec![spec(Role::Gate, "stub:band-energy"), spec(Role::AudioClassifier, "stub:band-energy")],
            vec![spec(Role::Gate, "stub:constant:1.5"), spec(Role::AudioClassifier, "stub:band-energy")],
            vec![spec(Role::Gate, "stub:constant:0.5"), spec(Role::AudioClassifier, "stub:onehot:3")],
            vec![spec(Role::Gate, "gpu:x"), spec(Role::AudioClassifier, "stub:band-energy")],
            vec![spec(Role::Gate, "stub:constant:0.5"), spec(Role::Gate, "stub:constant:0.5")],
            vec![],
        ];
        for backend in cases {
            assert!(Backends::from_manifest(&BackendManifest { backend: backend.clone() }, d.path()).is_err(), "{backend:?}");
        }
    }

    #[test]
    fn exec_protocol() {
        let mut b = ExecBackend::new("head -c 12 >/dev/null; echo 0.25 0.75", 2);
        let t = [1.0f32, 2.0];
        let out = b.infer(&ModelInput { tensor: &t, shape: &[2], waveform: None }).unwrap();
        assert_eq!(out, vec![0.25, 0.75]);
        let mut failing = ExecBackend::new("exit 3", 2);
        assert!(failing.infer(&ModelInput { tensor: &t, shape: &[2], waveform: None }).is_err());
        let mut det = ExecDetector { command: "cat >/dev/null; echo 1 2 3 4 0.9 14".into() };
        let img = RgbImage::from_fn(4, 4, |_, _| [0, 0, 0]);
        let d = det.detect(&img).unwrap();
        assert_eq!(d, vec![Detection { bbox: BoundingBox::new(1.0, 2.0, 3.0, 4.0), confidence: 0.9, class_id: 14 }]);
    }
}

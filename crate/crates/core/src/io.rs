//! On-disk formats: spin datasets (`ISNG`), RBM checkpoints (`RBM1`),
//! classifier checkpoints (`MLP1`) and CSV exports. All integers and floats
//! are little-endian.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{MlpParams, TempBins};
use crate::flow::FlowTrace;
use crate::error::{Error, Result};
use crate::lattice::{Ensemble, Provenance, SpinConfig, SpinKind};
use crate::rbm::{Propagation, RbmParams};

pub const DATASET_MAGIC: &[u8; 4] = b"ISNG";
pub const DATASET_VERSION: u16 = 1;
pub const DATASET_HEADER_LEN: usize = 4 + 2 + 2 + 4 + 8 + 8 + 1;
pub const RBM_MAGIC: &[u8; 4] = b"RBM1";
pub const MLP_MAGIC: &[u8; 4] = b"MLP1";

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let name = path.file_name().ok_or_else(|| Error::Invalid(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Sequential reader that reports exactly which bytes are missing.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if available < n {
            return Err(Error::Format(format!(
                "truncated file: {what} needs {n} bytes at offset {}, only {available} present ({} missing)",
                self.pos,
                n - available
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let raw = self.take(n * 8, what)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != expected {
            return Err(Error::Format(format!(
                "bad magic: expected {:?}, found {:?}",
                String::from_utf8_lossy(expected),
                String::from_utf8_lossy(got)
            )));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!("{} unexpected trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Header fields of a dataset file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetHeader {
    pub version: u16,
    pub side: u16,
    pub n_samples: u32,
    pub temperature: f64,
    pub seed: u64,
    pub kind: SpinKind,
}

impl DatasetHeader {
    fn payload_len(&self) -> usize {
        let sites = self.side as usize * self.side as usize;
        let per_config = match self.kind {
            SpinKind::Binary => sites.div_ceil(8),
            SpinKind::Real => sites * 8,
        };
        per_config * self.n_samples as usize
    }
}

impl std::fmt::Display for DatasetHeader {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.kind {
            SpinKind::Binary => "binary",
            SpinKind::Real => "real",
        };
        write!(
            f,
            "format version {}\nlattice {}x{}\nsamples {}\ntemperature {}\nseed {}\nkind {}",
            self.version, self.side, self.side, self.n_samples, self.temperature, self.seed, kind
        )
    }
}

pub fn encode_dataset(ensemble: &Ensemble) -> Result<Vec<u8>> {
    let side = u16::try_from(ensemble.side()).map_err(|_| Error::Invalid(format!("side {} exceeds u16", ensemble.side())))?;
    let n = u32::try_from(ensemble.len()).map_err(|_| Error::Invalid("too many samples for u32".into()))?;
    let header = DatasetHeader {
        version: DATASET_VERSION,
        side,
        n_samples: n,
        temperature: ensemble.temperature,
        seed: ensemble.seed,
        kind: ensemble.kind(),
    };
    let mut out = Vec::with_capacity(DATASET_HEADER_LEN + header.payload_len());
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&header.version.to_le_bytes());
    out.extend_from_slice(&side.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&header.temperature.to_le_bytes());
    out.extend_from_slice(&header.seed.to_le_bytes());
    out.push(ensemble.kind().code());
    for c in ensemble {
        match ensemble.kind() {
            SpinKind::Binary => {
                let mut byte = 0u8;
                for (i, v) in c.values().iter().enumerate() {
                    if *v > 0.0 {
                        byte |= 1 << (i % 8);
                    }
                    if i % 8 == 7 {
                        out.push(byte);
                        byte = 0;
                    }
                }
                if c.len() % 8 != 0 {
                    out.push(byte);
                }
            }
            SpinKind::Real => put_f64s(&mut out, c.values()),
        }
    }
    Ok(out)
}

fn read_header(cur: &mut Cursor<'_>) -> Result<DatasetHeader> {
    cur.magic(DATASET_MAGIC)?;
    let version = cur.u16("format version")?;
    if version != DATASET_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version} (expected {DATASET_VERSION})")));
    }
    let side = cur.u16("lattice side")?;
    let n_samples = cur.u32("sample count")?;
    let temperature = cur.f64("temperature")?;
    let seed = cur.u64("seed")?;
    let kind = SpinKind::from_code(cur.u8("kind")?)?;
    Ok(DatasetHeader { version, side, n_samples, temperature, seed, kind })
}

pub fn decode_dataset_header(bytes: &[u8]) -> Result<DatasetHeader> {
    read_header(&mut Cursor::new(bytes))
}

/// Decodes a dataset; provenance is not stored in the file and is set to `provenance`.
pub fn decode_dataset(bytes: &[u8], provenance: Provenance) -> Result<Ensemble> {
    let mut cur = Cursor::new(bytes);
    let h = read_header(&mut cur)?;
    let side = h.side as usize;
    if side == 0 {
        return Err(Error::Format("lattice side is zero".into()));
    }
    let sites = side * side;
    let mut ens = Ensemble::empty(side, h.kind, h.temperature, provenance, h.seed);
    for k in 0..h.n_samples as usize {
        let values = match h.kind {
            SpinKind::Binary => {
                let raw = cur.take(sites.div_ceil(8), &format!("config {k} payload"))?;
                (0..sites).map(|i| if raw[i / 8] >> (i % 8) & 1 == 1 { 1.0 } else { -1.0 }).collect()
            }
            SpinKind::Real => cur.f64s(sites, &format!("config {k} payload"))?,
        };
        ens.push(SpinConfig::new(side, values, h.kind)?)?;
    }
    cur.finish()?;
    Ok(ens)
}

pub fn write_dataset(path: &Path, ensemble: &Ensemble) -> Result<()> {
    write_atomic(path, &encode_dataset(ensemble)?)
}

pub fn read_dataset(path: &Path) -> Result<Ensemble> {
    decode_dataset(&fs::read(path)?, Provenance::MonteCarlo)
}

pub fn read_dataset_header(path: &Path) -> Result<DatasetHeader> {
    decode_dataset_header(&fs::read(path)?)
}

/// One row per config. The first line is a `#` comment carrying the header
/// fields so the file converts back without loss.
pub fn dataset_to_csv(ensemble: &Ensemble) -> String {
    let kind = match ensemble.kind() {
        SpinKind::Binary => "binary",
        SpinKind::Real => "real",
    };
    let mut s = format!("# side={} temperature={} seed={} kind={}\n", ensemble.side(), ensemble.temperature, ensemble.seed, kind);
    for c in ensemble {
        let row: Vec<String> = c.values().iter().map(|v| format!("{v}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn dataset_from_csv(text: &str) -> Result<Ensemble> {
    let mut lines = text.lines();
    let meta = lines.next().and_then(|l| l.strip_prefix('#')).ok_or_else(|| Error::Format("CSV dataset must start with a '# side=…' line".into()))?;
    let (mut side, mut temperature, mut seed, mut kind) = (None, None, None, None);
    for field in meta.split_whitespace() {
        let (k, v) = field.split_once('=').ok_or_else(|| Error::Format(format!("bad header field {field:?}")))?;
        let bad = |e: &dyn std::fmt::Display| Error::Format(format!("bad header value {field:?}: {e}"));
        match k {
            "side" => side = Some(v.parse::<usize>().map_err(|e| bad(&e))?),
            "temperature" => temperature = Some(v.parse::<f64>().map_err(|e| bad(&e))?),
            "seed" => seed = Some(v.parse::<u64>().map_err(|e| bad(&e))?),
            "kind" => {
                kind = Some(match v {
                    "binary" => SpinKind::Binary,
                    "real" => SpinKind::Real,
                    other => return Err(Error::Format(format!("unknown kind {other:?}"))),
                })
            }
            _ => {}
        }
    }
    let missing = |name: &str| Error::Format(format!("CSV header lacks {name}"));
    let side = side.ok_or_else(|| missing("side"))?;
    let mut ens = Ensemble::empty(
        side,
        kind.ok_or_else(|| missing("kind"))?,
        temperature.ok_or_else(|| missing("temperature"))?,
        Provenance::MonteCarlo,
        seed.ok_or_else(|| missing("seed"))?,
    );
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let values = line
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Format(format!("row {}: {e}", n + 1))))
            .collect::<Result<Vec<_>>>()?;
        ens.push(SpinConfig::new(side, values, ens.kind())?)?;
    }
    Ok(ens)
}

/// Trained RBM parameters with the settings needed to reuse them.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmCheckpoint {
    pub params: RbmParams,
    pub propagation: Propagation,
    pub seed: u64,
}

pub fn encode_rbm(ckpt: &RbmCheckpoint) -> Vec<u8> {
    let p = &ckpt.params;
    let mut out = Vec::new();
    out.extend_from_slice(RBM_MAGIC);
    out.extend_from_slice(&(p.n_visible() as u32).to_le_bytes());
    out.extend_from_slice(&(p.n_hidden() as u32).to_le_bytes());
    out.push(ckpt.propagation.code());
    out.extend_from_slice(&ckpt.seed.to_le_bytes());
    put_f64s(&mut out, &p.weights);
    put_f64s(&mut out, &p.visible_bias);
    put_f64s(&mut out, &p.hidden_bias);
    out
}

pub fn decode_rbm(bytes: &[u8]) -> Result<RbmCheckpoint> {
    let mut cur = Cursor::new(bytes);
    cur.magic(RBM_MAGIC)?;
    let nv = cur.u32("visible count")? as usize;
    let nh = cur.u32("hidden count")? as usize;
    let propagation = Propagation::from_code(cur.u8("propagation")?)?;
    let seed = cur.u64("seed")?;
    let w = cur.f64s(nv * nh, "weights")?;
    let bv = cur.f64s(nv, "visible biases")?;
    let bh = cur.f64s(nh, "hidden biases")?;
    cur.finish()?;
    Ok(RbmCheckpoint { params: RbmParams::new(nv, nh, w, bv, bh)?, propagation, seed })
}

pub fn write_rbm(path: &Path, ckpt: &RbmCheckpoint) -> Result<()> {
    write_atomic(path, &encode_rbm(ckpt))
}

pub fn read_rbm(path: &Path) -> Result<RbmCheckpoint> {
    decode_rbm(&fs::read(path)?)
}

/// Classifier weights plus the temperature of each output bin.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpCheckpoint {
    pub params: MlpParams,
    pub bins: TempBins,
}

/// Layout: magic, u32 n_in, n_hidden, n_out, then W1, b1, W2, b2 and the
/// n_out bin temperatures.
pub fn encode_mlp(ckpt: &MlpCheckpoint) -> Vec<u8> {
    let p = &ckpt.params;
    let mut out = Vec::new();
    out.extend_from_slice(MLP_MAGIC);
    for d in [p.n_in(), p.n_hidden(), p.n_out()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for block in p.blocks() {
        put_f64s(&mut out, block);
    }
    put_f64s(&mut out, ckpt.bins.temperatures());
    out
}

pub fn decode_mlp(bytes: &[u8]) -> Result<MlpCheckpoint> {
    let mut cur = Cursor::new(bytes);
    cur.magic(MLP_MAGIC)?;
    let n_in = cur.u32("input size")? as usize;
    let n_hid = cur.u32("hidden size")? as usize;
    let n_out = cur.u32("output size")? as usize;
    let w1 = cur.f64s(n_in * n_hid, "W1")?;
    let b1 = cur.f64s(n_hid, "b1")?;
    let w2 = cur.f64s(n_hid * n_out, "W2")?;
    let b2 = cur.f64s(n_out, "b2")?;
    let bins = TempBins::new(cur.f64s(n_out, "bin temperatures")?)?;
    cur.finish()?;
    Ok(MlpCheckpoint { params: MlpParams::new(n_in, n_hid, n_out, w1, b1, w2, b2)?, bins })
}

pub fn write_mlp(path: &Path, ckpt: &MlpCheckpoint) -> Result<()> {
    write_atomic(path, &encode_mlp(ckpt))
}

pub fn read_mlp(path: &Path) -> Result<MlpCheckpoint> {
    decode_mlp(&fs::read(path)?)
}

/// `flow.json` next to the per-stage dataset files of a persisted flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowManifest {
    pub mode: Propagation,
    pub seed: u64,
    pub stages: Vec<String>,
}

pub const FLOW_MANIFEST: &str = "flow.json";

/// Writes stage k to `stage-kkk.isng` and the manifest last, so a directory
/// with a manifest always has every stage it lists.
pub fn write_flow(dir: &Path, trace: &FlowTrace) -> Result<FlowManifest> {
    fs::create_dir_all(dir)?;
    let mut stages = Vec::with_capacity(trace.stages.len());
    for (k, stage) in trace.stages.iter().enumerate() {
        let name = format!("stage-{k:03}.isng");
        write_dataset(&dir.join(&name), stage)?;
        stages.push(name);
    }
    let manifest = FlowManifest { mode: trace.mode, seed: trace.seed, stages };
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(&dir.join(FLOW_MANIFEST), &json)?;
    Ok(manifest)
}

pub fn read_flow(dir: &Path) -> Result<FlowTrace> {
    let manifest: FlowManifest =
        serde_json::from_slice(&fs::read(dir.join(FLOW_MANIFEST))?).map_err(|e| Error::Format(format!("{FLOW_MANIFEST}: {e}")))?;
    let mut stages = Vec::with_capacity(manifest.stages.len());
    for (k, name) in manifest.stages.iter().enumerate() {
        let provenance = if k == 0 { Provenance::MonteCarlo } else { Provenance::RbmFlow(k as u32) };
        stages.push(decode_dataset(&fs::read(dir.join(name))?, provenance)?);
    }
    Ok(FlowTrace { stages, mode: manifest.mode, seed: manifest.seed })
}

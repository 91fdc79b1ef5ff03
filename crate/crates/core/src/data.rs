//! Volume I/O, synthetic dataset generation, and preprocessing.
//!
//! * Volumes live on disk in the QVOL format: magic `QVOL`, version
//!   `u32 = 1`, dims `d, h, w` as little-endian `u32`, then `d·h·w`
//!   little-endian `f32` voxels in C order (z slowest).
//! * A dataset is described by a manifest: one line per volume,
//!   `path<TAB>label<TAB>subject_id<TAB>split`, UTF-8 with LF endings,
//!   paths relative to the manifest's directory.
//! * Preprocessing = trilinear resize to a cube, then min–max
//!   normalization into [0, 1].
//! * The synthetic generator stands in for a clinical cohort: smooth
//!   random backgrounds for the negative class, the same backgrounds
//!   plus hyperintense ellipsoidal blobs for the positive class.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const QVOL_MAGIC: &[u8; 4] = b"QVOL";
pub const QVOL_VERSION: u32 = 1;

/// A single volumetric image plus its dataset metadata. The QVOL file
/// carries only dims and voxels; label and subject come from the
/// manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    /// (d, h, w), z slowest.
    pub dims: (usize, usize, usize),
    pub voxels: Vec<f32>,
    /// 0 = control, 1 = lesion-positive.
    pub label: u8,
    pub subject_id: String,
}

impl Volume {
    pub fn new(dims: (usize, usize, usize), voxels: Vec<f32>) -> Result<Volume> {
        let len = dims
            .0
            .checked_mul(dims.1)
            .and_then(|p| p.checked_mul(dims.2))
            .ok_or_else(|| Error::argument(format!("volume dims {dims:?} overflow")))?;
        if len == 0 || voxels.len() != len {
            return Err(Error::argument(format!(
                "dims {dims:?} want {len} voxels, got {}",
                voxels.len()
            )));
        }
        Ok(Volume {
            dims,
            voxels,
            label: 0,
            subject_id: String::new(),
        })
    }

    pub fn voxel_count(&self) -> usize {
        self.voxels.len()
    }
}

fn read_exact_at(r: &mut impl Read, buf: &mut [u8], offset: u64, what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            Error::format(offset, format!("file ends inside {what}"))
        } else {
            Error::Io(e)
        }
    })
}

/// Read a QVOL file. Label and subject_id are left at their defaults.
pub fn read_volume(path: &Path) -> Result<Volume> {
    let mut file = io::BufReader::new(fs::File::open(path)?);

    let mut magic = [0u8; 4];
    read_exact_at(&mut file, &mut magic, 0, "the magic header")?;
    if &magic != QVOL_MAGIC {
        return Err(Error::format(
            0,
            format!("bad magic {:?}, expected \"QVOL\"", String::from_utf8_lossy(&magic)),
        ));
    }

    let mut word = [0u8; 4];
    read_exact_at(&mut file, &mut word, 4, "the version field")?;
    let version = u32::from_le_bytes(word);
    if version != QVOL_VERSION {
        return Err(Error::format(
            4,
            format!("unsupported version {version}, expected {QVOL_VERSION}"),
        ));
    }

    let mut dims = [0usize; 3];
    for (i, d) in dims.iter_mut().enumerate() {
        let offset = 8 + 4 * i as u64;
        read_exact_at(&mut file, &mut word, offset, "the dimension header")?;
        *d = u32::from_le_bytes(word) as usize;
        if *d == 0 {
            return Err(Error::format(offset, "zero dimension".to_string()));
        }
    }
    let len = dims[0]
        .checked_mul(dims[1])
        .and_then(|p| p.checked_mul(dims[2]))
        .filter(|&p| p <= (1 << 31))
        .ok_or_else(|| Error::format(8, format!("dims {dims:?} overflow the voxel budget")))?;

    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;
    let expected = len * 4;
    if payload.len() != expected {
        return Err(Error::format(
            20 + payload.len().min(expected) as u64,
            format!(
                "payload holds {} bytes ({} voxels) but dims {dims:?} require {expected} ({len} voxels)",
                payload.len(),
                payload.len() / 4,
            ),
        ));
    }
    let voxels = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Volume::new((dims[0], dims[1], dims[2]), voxels)
}

/// Write a volume in QVOL format; `write → read` round-trips bit-exactly.
pub fn write_volume(volume: &Volume, path: &Path) -> Result<()> {
    let mut file = io::BufWriter::new(fs::File::create(path)?);
    file.write_all(QVOL_MAGIC)?;
    file.write_all(&QVOL_VERSION.to_le_bytes())?;
    for d in [volume.dims.0, volume.dims.1, volume.dims.2] {
        file.write_all(&(d as u32).to_le_bytes())?;
    }
    for v in &volume.voxels {
        file.write_all(&v.to_le_bytes())?;
    }
    file.flush()?;
    Ok(())
}

/// Trilinear resize to a cube of side `target_side`, corner-aligned:
/// source coordinate = target index × (src − 1)/(dst − 1), so the first
/// and last samples of each axis land exactly on the source corners.
pub fn resize_trilinear(vol: &Volume, target_side: usize) -> Result<Volume> {
    if target_side < 2 {
        return Err(Error::argument(format!(
            "resize target side must be at least 2, got {target_side}"
        )));
    }
    let (d, h, w) = vol.dims;
    if d < 2 || h < 2 || w < 2 {
        return Err(Error::argument(format!(
            "resize source dims must be at least 2 per axis, got {:?}",
            vol.dims
        )));
    }
    let t = target_side;
    // Per-axis sample positions: (floor index, ceil index, fraction).
    let axis = |src: usize| -> Vec<(usize, usize, f64)> {
        let scale = (src - 1) as f64 / (t - 1) as f64;
        (0..t)
            .map(|i| {
                let pos = i as f64 * scale;
                let lo = (pos.floor() as usize).min(src - 2);
                (lo, lo + 1, pos - lo as f64)
            })
            .collect()
    };
    let (zs, ys, xs) = (axis(d), axis(h), axis(w));
    let mut out = vec![0f32; t * t * t];
    let src = &vol.voxels;
    let at = |z: usize, y: usize, x: usize| src[(z * h + y) * w + x] as f64;
    let mut idx = 0;
    for &(z0, z1, fz) in &zs {
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let c00 = at(z0, y0, x0) * (1.0 - fx) + at(z0, y0, x1) * fx;
                let c01 = at(z0, y1, x0) * (1.0 - fx) + at(z0, y1, x1) * fx;
                let c10 = at(z1, y0, x0) * (1.0 - fx) + at(z1, y0, x1) * fx;
                let c11 = at(z1, y1, x0) * (1.0 - fx) + at(z1, y1, x1) * fx;
                let c0 = c00 * (1.0 - fy) + c01 * fy;
                let c1 = c10 * (1.0 - fy) + c11 * fy;
                out[idx] = (c0 * (1.0 - fz) + c1 * fz) as f32;
                idx += 1;
            }
        }
    }
    Ok(Volume {
        dims: (t, t, t),
        voxels: out,
        label: vol.label,
        subject_id: vol.subject_id.clone(),
    })
}

/// Min–max normalize into [0, 1]; a constant volume maps to all zeros.
pub fn normalize_minmax(vol: &Volume) -> Volume {
    let mut min = f32::INFINITY;
    let mut max = f32::NEG_INFINITY;
    for &v in &vol.voxels {
        min = min.min(v);
        max = max.max(v);
    }
    let voxels = if min >= max {
        vec![0f32; vol.voxels.len()]
    } else {
        let range = max as f64 - min as f64;
        vol.voxels
            .iter()
            .map(|&v| ((v as f64 - min as f64) / range) as f32)
            .collect()
    };
    Volume {
        dims: vol.dims,
        voxels,
        label: vol.label,
        subject_id: vol.subject_id.clone(),
    }
}

/// Dataset split membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Split> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::argument(format!(
                "unknown split {s:?}, expected train|val|test"
            ))),
        }
    }
}

/// One manifest line: where a volume lives and how it is used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Path relative to the manifest file's directory.
    pub path: String,
    pub label: u8,
    pub subject_id: String,
    pub split: Split,
}

/// The dataset index: volumes, labels, subjects, and split assignments.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Parse the tab-separated manifest format.
    pub fn read(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path)?;
        let mut entries = Vec::new();
        let mut offset = 0u64;
        for (lineno, line) in text.lines().enumerate() {
            let line_offset = offset;
            offset += line.len() as u64 + 1;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [p, label, subject, split] = fields.as_slice() else {
                return Err(Error::format(
                    line_offset,
                    format!("line {}: expected 4 tab-separated fields, got {}", lineno + 1, fields.len()),
                ));
            };
            let label: u8 = match *label {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::format(
                        line_offset,
                        format!("line {}: label must be 0 or 1, got {other:?}", lineno + 1),
                    ))
                }
            };
            let split = Split::parse(split).map_err(|e| {
                Error::format(line_offset, format!("line {}: {e}", lineno + 1))
            })?;
            entries.push(ManifestEntry {
                path: p.to_string(),
                label,
                subject_id: subject.to_string(),
                split,
            });
        }
        Ok(Manifest { entries })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.path,
                e.label,
                e.subject_id,
                e.split.as_str()
            ));
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn split_entries(&self, split: Split) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }

    /// Error if any subject appears in more than one split.
    pub fn check_subjects_disjoint(&self) -> Result<()> {
        let mut seen: std::collections::HashMap<&str, Split> = std::collections::HashMap::new();
        for e in &self.entries {
            match seen.get(e.subject_id.as_str()) {
                Some(&s) if s != e.split => {
                    return Err(Error::State(format!(
                        "subject {:?} appears in both {} and {}",
                        e.subject_id,
                        s.as_str(),
                        e.split.as_str()
                    )));
                }
                _ => {
                    seen.insert(&e.subject_id, e.split);
                }
            }
        }
        Ok(())
    }
}

/// Assign train/val/test per subject, stratified by class.
///
/// Within each class, subjects are shuffled (Fisher–Yates driven by
/// SplitMix64 on `seed`) and the splits take `floor(n·fraction)`
/// subjects each, leftovers going to train. Entries of one subject
/// always move together.
pub fn stratified_split(
    entries: &[ManifestEntry],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<Manifest> {
    let (ft, fv, fe) = fractions;
    for f in [ft, fv, fe] {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::argument(format!("split fraction {f} outside [0, 1]")));
        }
    }
    if (ft + fv + fe - 1.0).abs() > 1e-9 {
        return Err(Error::argument(format!(
            "split fractions {fractions:?} sum to {}, expected 1",
            ft + fv + fe
        )));
    }

    // Group subjects per class in first-appearance order.
    let mut class_subjects: [Vec<&str>; 2] = [Vec::new(), Vec::new()];
    let mut subject_label: std::collections::HashMap<&str, u8> = std::collections::HashMap::new();
    for e in entries {
        match subject_label.get(e.subject_id.as_str()) {
            None => {
                subject_label.insert(&e.subject_id, e.label);
                class_subjects[e.label as usize].push(&e.subject_id);
            }
            Some(&l) if l != e.label => {
                return Err(Error::argument(format!(
                    "subject {:?} has entries with both labels",
                    e.subject_id
                )));
            }
            _ => {}
        }
    }

    let mut rng = SplitMix64::new(seed);
    let mut assignment: std::collections::HashMap<&str, Split> = std::collections::HashMap::new();
    for subjects in class_subjects.iter_mut() {
        if subjects.is_empty() {
            continue;
        }
        if subjects.len() < 3 {
            return Err(Error::argument(format!(
                "class with {} subject(s) cannot be split three ways",
                subjects.len()
            )));
        }
        rng.shuffle(subjects);
        let n = subjects.len();
        let n_val = (n as f64 * fv).floor() as usize;
        let n_test = (n as f64 * fe).floor() as usize;
        let n_train = n - n_val - n_test; // floor(n·ft) plus the leftovers
        for (i, s) in subjects.iter().enumerate() {
            let split = if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
            assignment.insert(s, split);
        }
    }

    let entries = entries
        .iter()
        .map(|e| ManifestEntry {
            split: assignment[e.subject_id.as_str()],
            ..e.clone()
        })
        .collect();
    Ok(Manifest { entries })
}

/// Everything the synthetic generator needs to build one dataset.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticSpec {
    pub n_per_class: usize,
    pub side: usize,
    pub seed: u64,
    /// 0 = blobs at full contrast, 1 = blobs vanish entirely.
    pub difficulty: f64,
}

/// Generate a paired synthetic dataset under `out_dir` and return its
/// manifest (also written to `out_dir/manifest.tsv`).
///
/// Pair `i` shares one background-plus-noise volume: the class-0 member
/// is that volume as-is; the class-1 member adds 1–5 hyperintense
/// ellipsoidal blobs (semi-axes 5–15% of the side with a 1-voxel floor,
/// smooth `1 − r²` falloff, peak contrast `1.2·(1 − difficulty)`).
/// Sharing the background makes the class contrast exactly the blob
/// signal, so difficulty is the only knob controlling separability.
pub fn generate_synthetic(out_dir: &Path, spec: &SyntheticSpec) -> Result<Manifest> {
    if spec.n_per_class < 1 {
        return Err(Error::argument("n_per_class must be at least 1"));
    }
    if spec.side < 8 {
        return Err(Error::argument(format!(
            "volume side must be at least 8, got {}",
            spec.side
        )));
    }
    if !(0.0..=1.0).contains(&spec.difficulty) {
        return Err(Error::argument(format!(
            "difficulty {} outside [0, 1]",
            spec.difficulty
        )));
    }
    if spec.n_per_class < 3 {
        return Err(Error::argument(format!(
            "n_per_class {} cannot be split three ways (need at least 3)",
            spec.n_per_class
        )));
    }
    fs::create_dir_all(out_dir)?;

    let side = spec.side;
    let mut entries = Vec::new();
    for i in 0..spec.n_per_class {
        let (background, lesioned) =
            synthesize_pair(side, spec.difficulty, spec.seed, i as u64)?;

        for (label, voxels) in [(0u8, background), (1u8, lesioned)] {
            let name = format!("class{label}_{i:04}.qvol");
            let subject_id = format!("subj_c{label}_{i:04}");
            let mut vol = Volume::new((side, side, side), voxels.clone())?;
            vol.label = label;
            vol.subject_id = subject_id.clone();
            write_volume(&vol, &out_dir.join(&name))?;
            entries.push(ManifestEntry {
                path: name,
                label,
                subject_id,
                split: Split::Train, // placeholder until the split below
            });
        }
    }

    let manifest = stratified_split(&entries, (0.65, 0.15, 0.20), spec.seed)?;
    manifest.write(&out_dir.join("manifest.tsv"))?;
    Ok(manifest)
}

/// Synthesize one volume pair without touching disk: the shared
/// background (class 0) and its lesioned copy (class 1). Pairs draw
/// from independent streams derived from `(seed, pair_index)`, so any
/// pair is reproducible on its own — [`generate_synthetic`] is exactly
/// this, written out per index.
pub fn synthesize_pair(
    side: usize,
    difficulty: f64,
    seed: u64,
    pair_index: u64,
) -> Result<(Vec<f32>, Vec<f32>)> {
    if side < 8 {
        return Err(Error::argument(format!(
            "volume side must be at least 8, got {side}"
        )));
    }
    if !(0.0..=1.0).contains(&difficulty) {
        return Err(Error::argument(format!(
            "difficulty {difficulty} outside [0, 1]"
        )));
    }
    let mut rng = SplitMix64::derive(seed, pair_index);
    let background = synth_background(side, &mut rng);
    let lesioned = synth_add_blobs(&background, side, difficulty, &mut rng);
    Ok((background, lesioned))
}

/// Smooth random background: a base level, a few broad Gaussian bumps
/// (separable per axis, so cheap), and per-voxel noise.
fn synth_background(side: usize, rng: &mut SplitMix64) -> Vec<f32> {
    let n = side * side * side;
    let mut field = vec![0.3f64; n];
    let bumps = 4;
    for _ in 0..bumps {
        let amp = rng.uniform(0.05, 0.3);
        let sigma = rng.uniform(0.25 * side as f64, 0.6 * side as f64);
        let center: Vec<f64> = (0..3).map(|_| rng.uniform(0.0, side as f64)).collect();
        let axis_profile = |c: f64| -> Vec<f64> {
            (0..side)
                .map(|k| {
                    let dk = k as f64 - c;
                    (-dk * dk / (2.0 * sigma * sigma)).exp()
                })
                .collect()
        };
        let (pz, py, px) = (
            axis_profile(center[0]),
            axis_profile(center[1]),
            axis_profile(center[2]),
        );
        let mut idx = 0;
        for z in 0..side {
            let az = amp * pz[z];
            for y in 0..side {
                let azy = az * py[y];
                for x in 0..side {
                    field[idx] += azy * px[x];
                    idx += 1;
                }
            }
        }
    }
    for v in &mut field {
        *v += 0.02 * rng.normal();
    }
    field.iter().map(|&v| v as f32).collect()
}

/// Add 1–5 hyperintense ellipsoidal blobs to a copy of `background`.
///
/// Semi-axes are nominally 5–15% of the side but floored at 1 voxel
/// (range cap 2), which guarantees every blob covers at least one voxel
/// center: the nearest grid point is within 0.5 of the center per axis,
/// so r² ≤ 3·(0.5/1)² = 0.75 < 1. Without the floor, a sub-voxel blob
/// can miss the grid entirely, silently producing a positive-labeled
/// volume identical to its negative partner.
fn synth_add_blobs(background: &[f32], side: usize, difficulty: f64, rng: &mut SplitMix64) -> Vec<f32> {
    let mut voxels: Vec<f64> = background.iter().map(|&v| v as f64).collect();
    // The boost is calibrated against the background's dynamic range
    // (base 0.3, bumps at most ~0.3 each): at low difficulty a blob
    // clearly tops every bump, so "hyperintense" survives the per-volume
    // min-max normalization applied downstream.
    let peak = 1.2 * (1.0 - difficulty);
    let semi_lo = (0.05 * side as f64).max(1.0);
    let semi_hi = (0.15 * side as f64).max(2.0);
    let n_blobs = 1 + rng.below(5) as usize;
    for _ in 0..n_blobs {
        let center: Vec<f64> = (0..3)
            .map(|_| rng.uniform(0.1 * side as f64, 0.9 * side as f64))
            .collect();
        let semi: Vec<f64> = (0..3).map(|_| rng.uniform(semi_lo, semi_hi)).collect();
        // Only the blob's bounding box needs visiting.
        let bounds = |axis: usize| -> (usize, usize) {
            let lo = (center[axis] - semi[axis]).floor().max(0.0) as usize;
            let hi = ((center[axis] + semi[axis]).ceil() as usize + 1).min(side);
            (lo, hi)
        };
        let (z_range, y_range, x_range) = (bounds(0), bounds(1), bounds(2));
        for z in z_range.0..z_range.1 {
            let rz = (z as f64 - center[0]) / semi[0];
            for y in y_range.0..y_range.1 {
                let ry = (y as f64 - center[1]) / semi[1];
                for x in x_range.0..x_range.1 {
                    let rx = (x as f64 - center[2]) / semi[2];
                    let r2 = rz * rz + ry * ry + rx * rx;
                    if r2 < 1.0 {
                        voxels[(z * side + y) * side + x] += peak * (1.0 - r2);
                    }
                }
            }
        }
    }
    voxels.iter().map(|&v| v as f32).collect()
}

/// A preprocessed split ready for batching: each sample is a resized,
/// normalized cube flattened to `side³` f64 values.
#[derive(Debug, Clone)]
pub struct SplitData {
    pub side: usize,
    pub samples: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub subject_ids: Vec<String>,
}

impl SplitData {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Load every volume of `split`, resize to `side³`, and normalize.
pub fn load_split(manifest: &Manifest, base_dir: &Path, split: Split, side: usize) -> Result<SplitData> {
    let entries = manifest.split_entries(split);
    // Per-volume read + preprocess is independent across entries, so it
    // can run in parallel; collecting by entry index keeps the sample
    // order (and therefore everything downstream) identical at any
    // thread count.
    let load_one = |e: &&ManifestEntry| -> Result<Vec<f64>> {
        let path: PathBuf = base_dir.join(&e.path);
        let vol = normalize_minmax(&resize_trilinear(&read_volume(&path)?, side)?);
        Ok(vol.voxels.iter().map(|&v| v as f64).collect())
    };
    #[cfg(feature = "parallel")]
    let samples: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        entries.par_iter().map(load_one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let samples: Vec<Vec<f64>> = entries.iter().map(load_one).collect::<Result<_>>()?;
    Ok(SplitData {
        side,
        samples,
        labels: entries.iter().map(|e| e.label).collect(),
        subject_ids: entries.iter().map(|e| e.subject_id.clone()).collect(),
    })
}

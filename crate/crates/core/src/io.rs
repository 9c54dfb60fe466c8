//! File formats: ion catalogs, datasets, model files, profiles, reports,
//! trajectory exports and the binary distance cache.
//!
//! Every writer goes through [`write_atomic`] (temp file + rename) so a
//! crashed command never leaves a half-written output behind.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::domain::{
    find_ion, validate_catalog, ChannelConfig, FeatureVector, IonSpecies, WallParameters,
    GRAPHENE_WALL, N_FEATURES,
};
use crate::error::{Error, Result};
use crate::eval::{EvalReport, MaeCell};
use crate::ground_truth::{EmpiricalCdf, EmpiricalSource, TrajectorySlab};
use crate::model::Model;
use crate::profile::ConcentrationProfile;
use crate::sampler::CdfSample;

pub const MODEL_SCHEMA_VERSION: u32 = 1;
pub const DATASET_HEADER: [&str; 7] = [
    "r", "sigma", "epsilon", "width", "molarity", "charge", "cdf",
];
pub const PROFILE_HEADER: [&str; 3] = ["r_lo", "r_hi", "concentration_M"];
pub const LONG_PROFILE_HEADER: [&str; 7] = [
    "ion",
    "width",
    "molarity",
    "bin_size",
    "r_lo",
    "r_hi",
    "concentration_M",
];
pub const HEATMAP_HEADER: [&str; 5] = ["ion", "width", "molarity", "partition", "mae"];
pub const TRAJECTORY_HEADER: [&str; 3] = ["frame", "ion_id", "z"];
const CACHE_MAGIC: &[u8; 8] = b"IONCDF01";

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

/// Writes `bytes` to a sibling temp file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if is_gz(path) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn finish_bytes(path: &Path, plain: Vec<u8>) -> Result<Vec<u8>> {
    if is_gz(path) {
        // fixed compression level and no mtime: output depends only on content
        let mut enc = GzEncoder::new(Vec::new(), Compression::new(6));
        enc.write_all(&plain).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))
    } else {
        Ok(plain)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        row: e.line(),
        message: e.to_string(),
    })
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner()
        .map_err(|e| Error::io("<csv buffer>", e.into_error()))
}

fn parse_err(path: &Path, row: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        message: message.into(),
    }
}

fn check_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    if got.iter().map(str::trim).ne(want.iter().copied()) {
        return Err(parse_err(
            path,
            1,
            format!("expected header `{}`", want.join(",")),
        ));
    }
    Ok(())
}

fn parse_f64(path: &Path, row: usize, field: &str, text: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(path, row, format!("bad {field} value `{text}`")))
}

// ---------------------------------------------------------------------------
// catalog

/// Catalog file: the ion table plus the (constant, non-feature) wall
/// parameters kept for reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogFile {
    pub ions: Vec<IonSpecies>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall: Option<WallParameters>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CatalogShape {
    Table(CatalogFile),
    Bare(Vec<IonSpecies>),
}

pub fn write_catalog(path: &Path, catalog: &[IonSpecies]) -> Result<()> {
    validate_catalog(catalog)?;
    write_json(
        path,
        &CatalogFile {
            ions: catalog.to_vec(),
            wall: Some(GRAPHENE_WALL),
        },
    )
}

/// Reads a catalog written by [`write_catalog`] or a bare JSON array of ions.
pub fn read_catalog(path: &Path) -> Result<Vec<IonSpecies>> {
    let ions = match read_json::<CatalogShape>(path)? {
        CatalogShape::Table(f) => f.ions,
        CatalogShape::Bare(v) => v,
    };
    validate_catalog(&ions)?;
    Ok(ions)
}

// ---------------------------------------------------------------------------
// datasets

pub fn dataset_bytes(path: &Path, samples: &[CdfSample]) -> Result<Vec<u8>> {
    let rows = samples.iter().map(|s| {
        let v = &s.features.values;
        [
            v[0].to_string(),
            v[1].to_string(),
            v[2].to_string(),
            v[3].to_string(),
            v[4].to_string(),
            (v[5] as i64).to_string(),
            s.target.to_string(),
        ]
    });
    finish_bytes(path, csv_bytes(&DATASET_HEADER, rows)?)
}

/// Writes `r,sigma,epsilon,width,molarity,charge,cdf`; gzip when the path ends in `.gz`.
pub fn write_dataset(path: &Path, samples: &[CdfSample]) -> Result<()> {
    write_atomic(path, &dataset_bytes(path, samples)?)
}

pub fn read_dataset(path: &Path) -> Result<Vec<CdfSample>> {
    let bytes = read_bytes(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes.as_slice());
    check_header(path, rdr.headers()?, &DATASET_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| parse_err(path, row, e.to_string()))?;
        if rec.len() != DATASET_HEADER.len() {
            return Err(parse_err(
                path,
                row,
                format!("expected 7 fields, got {}", rec.len()),
            ));
        }
        let mut values = [0.0; N_FEATURES];
        for (j, v) in values.iter_mut().enumerate() {
            *v = parse_f64(path, row, DATASET_HEADER[j], &rec[j])?;
        }
        let target = parse_f64(path, row, "cdf", &rec[6])?;
        if !(0.0..=1.0).contains(&target) || values[0] < 0.0 {
            return Err(parse_err(
                path,
                row,
                "cdf must lie in [0, 1] and r must be >= 0",
            ));
        }
        out.push(CdfSample {
            features: FeatureVector { values },
            target,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// models

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    #[serde(flatten)]
    model: Model,
}

#[derive(Serialize)]
struct ModelFileRef<'a> {
    schema_version: u32,
    #[serde(flatten)]
    model: &'a Model,
}

pub fn model_bytes(model: &Model) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec(&ModelFileRef {
        schema_version: MODEL_SCHEMA_VERSION,
        model,
    })?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    write_atomic(path, &model_bytes(model)?)
}

pub fn load_model(path: &Path) -> Result<Model> {
    let file: ModelFile = read_json(path)?;
    if file.schema_version != MODEL_SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "{}: model schema {} (supported: {MODEL_SCHEMA_VERSION})",
            path.display(),
            file.schema_version
        )));
    }
    file.model.validate()?;
    Ok(file.model)
}

// ---------------------------------------------------------------------------
// profiles, reports, loss curves

pub fn write_profile(path: &Path, profile: &ConcentrationProfile) -> Result<()> {
    let rows = profile
        .bins()
        .map(|(lo, hi, c)| [lo.to_string(), hi.to_string(), c.to_string()]);
    write_atomic(path, &csv_bytes(&PROFILE_HEADER, rows)?)
}

pub fn read_profile_rows(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let bytes = read_bytes(path)?;
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    check_header(path, rdr.headers()?, &PROFILE_HEADER)?;
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| parse_err(path, i + 2, e.to_string()))?;
            Ok((
                parse_f64(path, i + 2, "r_lo", &rec[0])?,
                parse_f64(path, i + 2, "r_hi", &rec[1])?,
                parse_f64(path, i + 2, "concentration_M", &rec[2])?,
            ))
        })
        .collect()
}

/// Long-format table of many profiles, one row per bin.
pub fn write_profiles_long(path: &Path, profiles: &[ConcentrationProfile]) -> Result<()> {
    let rows = profiles.iter().flat_map(|p| {
        p.bins().map(move |(lo, hi, c)| {
            [
                p.config.species.name.clone(),
                p.config.width.to_string(),
                p.config.molarity.to_string(),
                p.bin_size.to_string(),
                lo.to_string(),
                hi.to_string(),
                c.to_string(),
            ]
        })
    });
    write_atomic(path, &csv_bytes(&LONG_PROFILE_HEADER, rows)?)
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<()> {
    write_json(path, report)
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    read_json(path)
}

pub fn write_heatmap(path: &Path, cells: &[MaeCell]) -> Result<()> {
    let rows = cells.iter().map(|c| {
        [
            c.ion.clone(),
            c.width.to_string(),
            c.molarity.to_string(),
            c.partition.to_string(),
            c.mae.to_string(),
        ]
    });
    write_atomic(path, &csv_bytes(&HEATMAP_HEADER, rows)?)
}

/// `epoch,loss` (or `round,mse`) with one row per entry.
pub fn write_loss_history(
    path: &Path,
    step_name: &str,
    loss_name: &str,
    history: &[f64],
) -> Result<()> {
    let rows = history
        .iter()
        .enumerate()
        .map(|(i, l)| [(i + 1).to_string(), l.to_string()]);
    write_atomic(path, &csv_bytes(&[step_name, loss_name], rows)?)
}

pub fn read_loss_history(path: &Path) -> Result<Vec<f64>> {
    let bytes = read_bytes(path)?;
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| parse_err(path, i + 2, e.to_string()))?;
            parse_f64(path, i + 2, "loss", rec.get(1).unwrap_or(""))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// trajectories

/// Sidecar describing one trajectory export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub ion_name: String,
    pub width_nm: f64,
    #[serde(rename = "molarity_M")]
    pub molarity_m: f64,
    pub center_nm: f64,
}

pub fn read_trajectory_meta(path: &Path) -> Result<TrajectoryMeta> {
    read_json(path)
}

pub fn write_trajectory_meta(path: &Path, meta: &TrajectoryMeta) -> Result<()> {
    write_json(path, meta)
}

/// Writes a slab as `frame,ion_id,z`, with `ions_per_frame` coordinates per frame.
pub fn write_trajectory(path: &Path, slab: &TrajectorySlab, ions_per_frame: usize) -> Result<()> {
    let per = ions_per_frame.max(1);
    let rows = slab
        .z_coords
        .iter()
        .enumerate()
        .map(|(i, z)| [(i / per).to_string(), (i % per).to_string(), z.to_string()]);
    write_atomic(
        path,
        &finish_bytes(path, csv_bytes(&TRAJECTORY_HEADER, rows)?)?,
    )
}

/// Parses a trajectory export and validates every coordinate against the
/// channel width. Errors name the offending line.
pub fn read_trajectory(
    path: &Path,
    meta: &TrajectoryMeta,
    catalog: &[IonSpecies],
) -> Result<TrajectorySlab> {
    let species = find_ion(catalog, &meta.ion_name)?.clone();
    let config = ChannelConfig::new(species, meta.width_nm, meta.molarity_m)?;
    let limit = config.half_width() + crate::ground_truth::WALL_TOLERANCE;

    let bytes = read_bytes(path)?;
    let mut lines = BufReader::new(bytes.as_slice()).lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::io(path, e))?
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    if header
        .split(',')
        .map(str::trim)
        .ne(TRAJECTORY_HEADER.iter().copied())
    {
        return Err(parse_err(
            path,
            1,
            format!("expected header `{}`", TRAJECTORY_HEADER.join(",")),
        ));
    }
    let mut z_coords = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(
                path,
                row,
                format!("expected 3 fields, got {}", fields.len()),
            ));
        }
        for (name, text) in [("frame", fields[0]), ("ion_id", fields[1])] {
            text.trim()
                .parse::<u64>()
                .map_err(|_| parse_err(path, row, format!("bad {name} `{text}`")))?;
        }
        let z = parse_f64(path, row, "z", fields[2])?;
        if (z - meta.center_nm).abs() > limit {
            return Err(parse_err(
                path,
                row,
                format!("z={z} nm is outside the channel (|z-o| > {limit} nm)"),
            ));
        }
        z_coords.push(z);
    }
    TrajectorySlab::new(config, meta.center_nm, z_coords)
}

// ---------------------------------------------------------------------------
// binary distance cache
//
// layout (little endian):
//   magic "IONCDF01", u64 entry count, then per entry:
//   u32 name length, name bytes, f64 sigma, f64 epsilon, i32 charge,
//   f64 width, f64 molarity, u64 n, n x f64 sorted distances

pub fn cache_bytes(source: &EmpiricalSource) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&(source.entries().len() as u64).to_le_bytes());
    for (config, cdf) in source.entries() {
        let ion = &config.species;
        out.extend_from_slice(&(ion.name.len() as u32).to_le_bytes());
        out.extend_from_slice(ion.name.as_bytes());
        out.extend_from_slice(&ion.sigma.to_le_bytes());
        out.extend_from_slice(&ion.epsilon.to_le_bytes());
        out.extend_from_slice(&ion.charge.to_le_bytes());
        out.extend_from_slice(&config.width.to_le_bytes());
        out.extend_from_slice(&config.molarity.to_le_bytes());
        out.extend_from_slice(&(cdf.distances().len() as u64).to_le_bytes());
        for d in cdf.distances() {
            out.extend_from_slice(&d.to_le_bytes());
        }
    }
    out
}

pub fn write_cache(path: &Path, source: &EmpiricalSource) -> Result<()> {
    write_atomic(path, &cache_bytes(source))
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| parse_err(self.path, self.pos, "truncated cache file"))?;
        self.pos = end;
        Ok(slice.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn read_cache(path: &Path) -> Result<EmpiricalSource> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor {
        path,
        bytes: &bytes,
        pos: 0,
    };
    if &cur.take::<8>()? != CACHE_MAGIC {
        return Err(Error::Schema(format!(
            "{}: not a distance cache",
            path.display()
        )));
    }
    let count = cur.u64()?;
    let mut source = EmpiricalSource::new();
    for _ in 0..count {
        let len = cur.u32()? as usize;
        let name_bytes = cur
            .bytes
            .get(cur.pos..cur.pos + len)
            .ok_or_else(|| parse_err(path, cur.pos, "truncated cache file"))?;
        let name = String::from_utf8(name_bytes.to_vec())
            .map_err(|_| parse_err(path, cur.pos, "bad ion name"))?;
        cur.pos += len;
        let species = IonSpecies::new(name, cur.f64()?, cur.f64()?, cur.i32()?)?;
        let config = ChannelConfig::new(species, cur.f64()?, cur.f64()?)?;
        let n = cur.u64()? as usize;
        let mut distances = Vec::with_capacity(n);
        for _ in 0..n {
            distances.push(cur.f64()?);
        }
        source.insert(config, EmpiricalCdf::from_sorted(distances)?)?;
    }
    Ok(source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ion_catalog;
    use crate::gbdt::{train_gbdt, GbdtTrainConfig};
    use crate::ground_truth::{empirical_cdf, synthesize_trajectory, SyntheticOracle};
    use crate::mlp::init_mlp;
    use crate::sampler::sample_config;

    fn na(w: f64, c: f64) -> ChannelConfig {
        ChannelConfig::new(ion_catalog()[0].clone(), w, c).unwrap()
    }

    #[test]
    fn catalog_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ions.json");
        write_catalog(&p, &ion_catalog()).unwrap();
        assert_eq!(read_catalog(&p).unwrap(), ion_catalog());
        let json: serde_json::Value = serde_json::from_slice(&fs::read(&p).unwrap()).unwrap();
        assert_eq!(json["wall"]["sigma"], 3.39);
        assert_eq!(json["ions"].as_array().unwrap().len(), 5);

        fs::write(&p, serde_json::to_vec(&ion_catalog()[..2]).unwrap()).unwrap();
        assert_eq!(read_catalog(&p).unwrap(), ion_catalog()[..2].to_vec());
    }

    #[test]
    fn dataset_round_trip_plain_and_gz() {
        let dir = tempfile::tempdir().unwrap();
        let samples = sample_config(&na(1.7, 2.4), &SyntheticOracle, 50, 1).unwrap();
        for name in ["d.csv", "d.csv.gz"] {
            let p = dir.path().join(name);
            write_dataset(&p, &samples).unwrap();
            assert_eq!(read_dataset(&p).unwrap(), samples);
        }
        let text = fs::read_to_string(dir.path().join("d.csv")).unwrap();
        assert!(text.starts_with("r,sigma,epsilon,width,molarity,charge,cdf\n"));
    }

    #[test]
    fn dataset_errors_carry_row_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(
            &p,
            "r,sigma,epsilon,width,molarity,charge,cdf\n0.1,1,1,1,1,1,0.5\n0.2,x,1,1,1,1,0.5\n",
        )
        .unwrap();
        let err = read_dataset(&p).unwrap_err().to_string();
        assert!(err.contains(":3:"), "{err}");
        fs::write(&p, "a,b\n").unwrap();
        assert!(read_dataset(&p).is_err());
    }

    #[test]
    fn model_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mlp = Model::Mlp(init_mlp(&[6, 5, 3, 1], 2).unwrap());
        let p = dir.path().join("mlp.json");
        save_model(&p, &mlp).unwrap();
        assert_eq!(load_model(&p).unwrap(), mlp);
        let json: serde_json::Value = serde_json::from_slice(&fs::read(&p).unwrap()).unwrap();
        assert_eq!(json["type"], "mlp");
        assert_eq!(json["schema_version"], 1);
        assert!(json["layer_dims"].is_array());

        let samples = sample_config(&na(1.2, 1.0), &SyntheticOracle, 40, 3).unwrap();
        let cfg = GbdtTrainConfig {
            rounds: 2,
            max_depth: 3,
            ..Default::default()
        };
        let gbdt = Model::Gbdt(train_gbdt(&samples, &cfg).unwrap().model);
        let p = dir.path().join("gbdt.json");
        save_model(&p, &gbdt).unwrap();
        assert_eq!(load_model(&p).unwrap(), gbdt);

        let mut json: serde_json::Value = serde_json::from_slice(&fs::read(&p).unwrap()).unwrap();
        json["schema_version"] = 99.into();
        fs::write(&p, serde_json::to_vec(&json).unwrap()).unwrap();
        assert!(matches!(load_model(&p), Err(Error::Schema(_))));
    }

    #[test]
    fn trajectory_ingest_and_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = na(2.0, 2.0);
        let slab = synthesize_trajectory(&SyntheticOracle, &cfg, 100, 200, 7).unwrap();
        let traj = dir.path().join("t.csv");
        write_trajectory(&traj, &slab, 100).unwrap();
        let meta = TrajectoryMeta {
            ion_name: "Na".into(),
            width_nm: 2.0,
            molarity_m: 2.0,
            center_nm: slab.center,
        };
        let read = read_trajectory(&traj, &meta, &ion_catalog()).unwrap();
        assert_eq!(read, slab);

        let mut source = EmpiricalSource::new();
        source
            .insert(cfg.clone(), EmpiricalCdf::from_slab(&read))
            .unwrap();
        let cache = dir.path().join("cache.bin");
        write_cache(&cache, &source).unwrap();
        let back = read_cache(&cache).unwrap();
        let cdf = back.lookup(&cfg).unwrap();
        for k in 0..=110 {
            let r = k as f64 * 0.01;
            assert_eq!(cdf.eval(r), empirical_cdf(&slab, r).unwrap());
        }
    }

    #[test]
    fn trajectory_rejects_coordinates_outside_channel() {
        let dir = tempfile::tempdir().unwrap();
        let traj = dir.path().join("t.csv");
        fs::write(&traj, "frame,ion_id,z\n0,0,1.0\n0,1,2.04\n1,0,2.2\n").unwrap();
        let meta = TrajectoryMeta {
            ion_name: "Cl".into(),
            width_nm: 2.0,
            molarity_m: 1.0,
            center_nm: 1.0,
        };
        let err = read_trajectory(&traj, &meta, &ion_catalog())
            .unwrap_err()
            .to_string();
        assert!(err.contains(":4:"), "{err}");

        fs::write(&traj, "frame,ion_id,z\n0,0,1.0\n0,x,1.1\n").unwrap();
        let err = read_trajectory(&traj, &meta, &ion_catalog())
            .unwrap_err()
            .to_string();
        assert!(err.contains(":3:"), "{err}");
    }
}

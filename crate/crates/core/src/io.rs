//! Field serialization: flat little-endian binary, JSON sidecar, CSV tables.
//!
//! Binary layout (all 8-byte little-endian): `n`, `cells_per_axis`,
//! `lower[0..n]`, `upper[0..n]`, `components`, then `len * components`
//! node values in row-major node order, components innermost.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DomainKind, GridSpec, ScalarField, VectorField};

/// Where an output came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub operation: String,
    pub parameters: serde_json::Value,
    pub grid_hash: String,
}

impl Provenance {
    pub fn new(operation: &str, parameters: serde_json::Value, spec: &GridSpec) -> Self {
        Provenance { operation: operation.to_string(), parameters, grid_hash: spec.hash() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub n: usize,
    pub cells_per_axis: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub domain: DomainKind,
    pub components: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

pub fn encode(spec: &GridSpec, components: usize, values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * (3 + 2 * spec.n() + values.len()));
    out.extend((spec.n() as u64).to_le_bytes());
    out.extend((spec.cells() as u64).to_le_bytes());
    for v in spec.lower().iter().chain(spec.upper()) {
        out.extend(v.to_le_bytes());
    }
    out.extend((components as u64).to_le_bytes());
    for v in values {
        out.extend(v.to_le_bytes());
    }
    out
}

/// Decode a binary field into its box grid, component count and values.
pub fn decode(bytes: &[u8]) -> Result<(GridSpec, usize, Vec<f64>)> {
    let mut words = bytes.chunks_exact(8).map(|c| <[u8; 8]>::try_from(c).unwrap());
    let bad = || Error::Config("truncated field binary".into());
    if bytes.len() % 8 != 0 {
        return Err(Error::Config("field binary length is not a multiple of 8".into()));
    }
    let n = u64::from_le_bytes(words.next().ok_or_else(bad)?) as usize;
    let cells = u64::from_le_bytes(words.next().ok_or_else(bad)?) as usize;
    if n == 0 || n > crate::grid::MAX_DIM {
        return Err(Error::Config(format!("field binary declares dimension {n}")));
    }
    let mut bounds = Vec::with_capacity(2 * n);
    for _ in 0..2 * n {
        bounds.push(f64::from_le_bytes(words.next().ok_or_else(bad)?));
    }
    let components = u64::from_le_bytes(words.next().ok_or_else(bad)?) as usize;
    let spec = GridSpec::new(bounds[..n].to_vec(), bounds[n..].to_vec(), cells, DomainKind::Box)?;
    let values: Vec<f64> = words.map(f64::from_le_bytes).collect();
    if values.len() != spec.len() * components {
        return Err(Error::Config(format!(
            "field binary holds {} values, expected {}",
            values.len(),
            spec.len() * components
        )));
    }
    Ok((spec, components, values))
}

fn sidecar_for(spec: &GridSpec, components: usize, provenance: Option<Provenance>) -> Sidecar {
    Sidecar {
        n: spec.n(),
        cells_per_axis: spec.cells(),
        lower: spec.lower().to_vec(),
        upper: spec.upper().to_vec(),
        domain: spec.domain().clone(),
        components,
        provenance,
    }
}

/// Write `<stem>.bin` and `<stem>.json` into `dir`.
pub fn write_field(
    dir: &Path,
    stem: &str,
    spec: &GridSpec,
    components: usize,
    values: &[f64],
    provenance: Option<Provenance>,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::File::create(dir.join(format!("{stem}.bin")))?.write_all(&encode(spec, components, values))?;
    let side = sidecar_for(spec, components, provenance);
    std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

pub fn write_scalar(dir: &Path, stem: &str, f: &ScalarField, provenance: Option<Provenance>) -> Result<()> {
    write_field(dir, stem, f.spec(), 1, f.values(), provenance)
}

pub fn write_vector(dir: &Path, stem: &str, u: &VectorField, provenance: Option<Provenance>) -> Result<()> {
    write_field(dir, stem, u.spec(), u.components(), u.values(), provenance)
}

/// Read a field binary back; the domain is restored from the sidecar when
/// one exists next to it.
pub fn read_field(path: &Path) -> Result<(Arc<GridSpec>, usize, Vec<f64>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let (mut spec, components, values) = decode(&bytes)?;
    let side = path.with_extension("json");
    if side.exists() {
        let s: Sidecar = serde_json::from_str(&std::fs::read_to_string(side)?)?;
        spec = GridSpec::new(s.lower, s.upper, s.cells_per_axis, s.domain)?;
    }
    Ok((Arc::new(spec), components, values))
}

/// CSV of node coordinates and values for masked-in nodes.
pub fn write_csv<W: Write>(out: W, spec: &GridSpec, components: usize, values: &[f64], mask: &[bool]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let axes = ["x", "y", "z", "w"];
    let mut header: Vec<String> = vec!["node".into()];
    header.extend(axes[..spec.n()].iter().map(|s| s.to_string()));
    if components == 1 {
        header.push("value".into());
    } else {
        header.extend((0..components).map(|k| format!("u{k}")));
    }
    w.write_record(&header)?;
    for i in (0..spec.len()).filter(|&i| mask[i]) {
        let mut rec = vec![i.to_string()];
        rec.extend(spec.coords(i).iter().map(|v| format!("{v:.17e}")));
        rec.extend(values[i * components..(i + 1) * components].iter().map(|v| format!("{v:.17e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sample_field;

    #[test]
    fn binary_round_trip() {
        let g = Arc::new(GridSpec::cube(2, 1.0, 8).unwrap());
        let f = sample_field(g.clone(), |x| x[0] - 3.0 * x[1]).unwrap();
        let bytes = encode(&g, 1, f.values());
        assert_eq!(bytes.len(), 8 * (3 + 4 + 64));
        assert_eq!(&bytes[..8], &2u64.to_le_bytes());
        let (spec, m, values) = decode(&bytes).unwrap();
        assert_eq!(spec, *g);
        assert_eq!(m, 1);
        assert_eq!(values, f.values());
        assert!(decode(&bytes[..bytes.len() - 8]).is_err());
    }

    #[test]
    fn sidecar_restores_ball_domain() {
        let dir = tempfile::tempdir().unwrap();
        let g = Arc::new(GridSpec::ball(3, 1.0, 8).unwrap());
        let f = sample_field(g.clone(), |x| x[2]).unwrap();
        let prov = Provenance::new("test", serde_json::json!({"k": 1}), &g);
        write_scalar(dir.path(), "f", &f, Some(prov)).unwrap();
        let (spec, _, values) = read_field(&dir.path().join("f.bin")).unwrap();
        assert_eq!(*spec, *g);
        assert_eq!(values, f.values());
    }

    #[test]
    fn csv_lists_masked_nodes() {
        let g = Arc::new(GridSpec::ball(2, 1.0, 8).unwrap());
        let f = ScalarField::constant(g.clone(), 1.5);
        let mut buf = Vec::new();
        write_csv(&mut buf, &g, 1, f.values(), f.mask()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows = text.lines().count() - 1;
        assert_eq!(rows, f.mask().iter().filter(|m| **m).count());
        assert!(text.starts_with("node,x,y,value"));
    }
}

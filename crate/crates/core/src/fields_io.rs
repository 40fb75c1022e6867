//! Field serialization: a legacy-VTK structured-points text file for
//! inspection and visualization, plus a lossless little-endian binary
//! sidecar (`.bioc`) that the tool itself reads back. The sidecar is the
//! authoritative representation; read(write(state)) is bit-identical.
//!
//! Sidecar layout (all integers and floats little-endian):
//!
//! ```text
//! magic   5 bytes  "BIOC1"
//! version u32      1
//! dims    3 x u32  cells per axis
//! edges   3 x f64  box edge lengths
//! alpha1  f64
//! alpha2  f64
//! nfields u32
//! then per field:
//!   name_len u32, name utf-8 bytes
//!   kind     u8   0 = cell-centered, 1|2|3 = face-staggered along axis-1
//!   count    u64  number of f64 values
//!   values   count x f64
//! ```
//!
//! The shipped writer emits, in order: `u_x`, `u_y`, `u_z`, `p`, `n_hat`,
//! `c_hat`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{MacGrid, ScalarField, VectorField};
use crate::ops::face_to_cell;
use crate::solver::FieldState;

const MAGIC: &[u8; 5] = b"BIOC1";
const VERSION: u32 = 1;

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn write_field<W: Write>(w: &mut W, name: &str, kind: u8, values: &[f64]) -> Result<()> {
    write_u32(w, name.len() as u32)?;
    w.write_all(name.as_bytes())?;
    w.write_all(&[kind])?;
    write_u64(w, values.len() as u64)?;
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Writes `<base>.vtk` and `<base>.bioc`; returns both paths.
pub fn write_fields(state: &FieldState, base: &Path) -> Result<(PathBuf, PathBuf)> {
    let vtk_path = base.with_extension("vtk");
    let sidecar_path = base.with_extension("bioc");
    write_vtk(state, &vtk_path)?;
    write_sidecar(state, &sidecar_path)?;
    Ok((vtk_path, sidecar_path))
}

pub fn write_sidecar(state: &FieldState, path: &Path) -> Result<()> {
    let g = &state.n_hat.grid;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    write_u32(&mut w, VERSION)?;
    for d in 0..3 {
        write_u32(&mut w, g.n[d] as u32)?;
    }
    for d in 0..3 {
        write_f64(&mut w, g.len[d])?;
    }
    write_f64(&mut w, state.alpha1)?;
    write_f64(&mut w, state.alpha2)?;
    write_u32(&mut w, 6)?;
    write_field(&mut w, "u_x", 1, &state.u.comp[0])?;
    write_field(&mut w, "u_y", 2, &state.u.comp[1])?;
    write_field(&mut w, "u_z", 3, &state.u.comp[2])?;
    write_field(&mut w, "p", 0, &state.p.data)?;
    write_field(&mut w, "n_hat", 0, &state.n_hat.data)?;
    write_field(&mut w, "c_hat", 0, &state.c_hat.data)?;
    w.flush()?;
    Ok(())
}

pub fn read_fields(path: &Path) -> Result<FieldState> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(MAGIC)
        )));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported sidecar version {version}"
        )));
    }
    let n = [
        read_u32(&mut r)? as usize,
        read_u32(&mut r)? as usize,
        read_u32(&mut r)? as usize,
    ];
    let edges = [read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?];
    let alpha1 = read_f64(&mut r)?;
    let alpha2 = read_f64(&mut r)?;
    let grid = MacGrid::new(edges, n)?;
    let nfields = read_u32(&mut r)?;
    let mut u = VectorField::zeros(&grid);
    let mut p = ScalarField::zeros(&grid);
    let mut n_hat = ScalarField::zeros(&grid);
    let mut c_hat = ScalarField::zeros(&grid);
    let mut seen = 0u32;
    for _ in 0..nfields {
        let name_len = read_u32(&mut r)? as usize;
        if name_len > 4096 {
            return Err(Error::Format("field name too long".to_string()));
        }
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| Error::Format("field name is not utf-8".to_string()))?;
        let mut kind = [0u8; 1];
        r.read_exact(&mut kind)?;
        let count = read_u64(&mut r)? as usize;
        let expected = match kind[0] {
            0 => grid.cell_count(),
            1..=3 => grid.face_count(kind[0] as usize - 1),
            k => return Err(Error::Format(format!("unknown field kind {k}"))),
        };
        if count != expected {
            return Err(Error::Format(format!(
                "field `{name}`: {count} values, expected {expected} for its kind"
            )));
        }
        let mut buf = vec![0u8; count * 8];
        r.read_exact(&mut buf)?;
        let values: Vec<f64> = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        match name.as_str() {
            "u_x" => u.comp[0] = values,
            "u_y" => u.comp[1] = values,
            "u_z" => u.comp[2] = values,
            "p" => p.data = values,
            "n_hat" => n_hat.data = values,
            "c_hat" => c_hat.data = values,
            other => {
                return Err(Error::Format(format!("unexpected field `{other}`")));
            }
        }
        seen += 1;
    }
    if seen != 6 {
        return Err(Error::Format(format!("expected 6 fields, found {seen}")));
    }
    Ok(FieldState {
        u,
        p,
        n_hat,
        c_hat,
        alpha1,
        alpha2,
    })
}

/// Legacy VTK structured-points, ASCII, cell data. Velocity is resampled
/// to cell centers for visualization; the sidecar keeps the faces.
pub fn write_vtk(state: &FieldState, path: &Path) -> Result<()> {
    let g: &Arc<MacGrid> = &state.n_hat.grid;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "stationary bioconvection fields")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} {}", g.n[0] + 1, g.n[1] + 1, g.n[2] + 1)?;
    writeln!(w, "ORIGIN 0 0 0")?;
    writeln!(w, "SPACING {:.17e} {:.17e} {:.17e}", g.h[0], g.h[1], g.h[2])?;
    writeln!(w, "CELL_DATA {}", g.cell_count())?;
    for (name, field) in [
        ("pressure", &state.p),
        ("bacteria_excess", &state.n_hat),
        ("oxygen_excess", &state.c_hat),
    ] {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in &field.data {
            writeln!(w, "{:.17e}", v)?;
        }
    }
    let centered = face_to_cell(&state.u);
    writeln!(w, "VECTORS velocity double")?;
    for c in 0..g.cell_count() {
        writeln!(
            w,
            "{:.17e} {:.17e} {:.17e}",
            centered[0].data[c], centered[1].data[c], centered[2].data[c]
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(seed: u64) -> FieldState {
        let grid = MacGrid::cube(1.0, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = FieldState::zero(&grid, 0.5, 0.2);
        for d in 0..3 {
            for v in &mut state.u.comp[d] {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        for f in [&mut state.p, &mut state.n_hat, &mut state.c_hat] {
            for v in &mut f.data {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        state
    }

    #[test]
    fn sidecar_roundtrip_is_bit_identical() {
        let dir = std::env::temp_dir().join("bioconv_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let state = random_state(1);
        let path = dir.join("state.bioc");
        write_sidecar(&state, &path).unwrap();
        let back = read_fields(&path).unwrap();
        for d in 0..3 {
            assert_eq!(state.u.comp[d], back.u.comp[d]);
        }
        assert_eq!(state.p.data, back.p.data);
        assert_eq!(state.n_hat.data, back.n_hat.data);
        assert_eq!(state.c_hat.data, back.c_hat.data);
        assert_eq!(state.alpha1, back.alpha1);
        // and the raw bytes survive a second write
        let path2 = dir.join("state2.bioc");
        write_sidecar(&back, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn wrong_magic_rejected() {
        let dir = std::env::temp_dir().join("bioconv_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.bioc");
        std::fs::write(&path, b"NOPE1junkjunkjunk").unwrap();
        match read_fields(&path) {
            Err(Error::Format(msg)) => assert!(msg.contains("magic")),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn vtk_of_zero_state_has_zero_arrays() {
        let dir = std::env::temp_dir().join("bioconv_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let grid = MacGrid::cube(1.0, 4);
        let state = FieldState::zero(&grid, 0.0, 0.0);
        let path = dir.join("zero.vtk");
        write_vtk(&state, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("DATASET STRUCTURED_POINTS"));
        assert!(text.contains("CELL_DATA 64"));
        for line in text.lines().filter(|l| {
            !l.is_empty() && l.chars().next().unwrap().is_ascii_digit() && l.contains('e')
        }) {
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().unwrap();
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn truncated_sidecar_errors() {
        let dir = std::env::temp_dir().join("bioconv_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let state = random_state(2);
        let path = dir.join("trunc.bioc");
        write_sidecar(&state, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(read_fields(&path).is_err());
    }
}

//! Trajectory files: per-sample CSV and the compact `FASP` binary.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{s, Array2};

use crate::dynamics::PathSample;
use crate::error::{FasError, Result};

pub const FASP_MAGIC: &[u8; 4] = b"FASP";
pub const FASP_VERSION: u32 = 1;

/// A recorded sequence of `(t, path)` frames.
pub type Frames = Vec<(f64, PathSample)>;

fn frame_dims(frames: &[(f64, PathSample)]) -> Result<(usize, usize)> {
    let first = frames.first().ok_or(FasError::EmptyBatch)?;
    let dims = (first.1.n_points(), first.1.channels());
    if let Some((_, bad)) = frames.iter().find(|(_, p)| (p.n_points(), p.channels()) != dims) {
        return Err(FasError::shape(format!("{dims:?}"), format!("{:?}", (bad.n_points(), bad.channels()))));
    }
    Ok(dims)
}

/// Columns `step,t,u_index,channel,value`; `u_index` runs over `0..=K+1`, endpoints included.
pub fn write_csv<W: Write>(w: &mut W, frames: &[(f64, PathSample)]) -> Result<()> {
    frame_dims(frames)?;
    writeln!(w, "step,t,u_index,channel,value")?;
    for (step, (t, path)) in frames.iter().enumerate() {
        for (u, row) in path.full().outer_iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                writeln!(w, "{step},{t:e},{u},{c},{v:e}")?;
            }
        }
    }
    Ok(())
}

pub fn save_csv(path: &Path, frames: &[(f64, PathSample)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(&mut w, frames)?;
    w.flush()?;
    Ok(())
}

fn from_full(full: Array2<f64>) -> Result<PathSample> {
    let n = full.nrows();
    if n < 3 {
        return Err(FasError::Format(format!("a path needs at least 3 grid points, found {n}")));
    }
    PathSample::new(
        full.slice(s![1..n - 1, ..]).to_owned(),
        full.row(0).to_owned(),
        full.row(n - 1).to_owned(),
    )
}

pub fn read_csv<R: BufRead>(r: R) -> Result<Frames> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != "step,t,u_index,channel,value" {
        return Err(FasError::Format(format!("unexpected trajectory header '{}'", header.trim())));
    }
    // (step, t, u, c, v)
    let mut recs: Vec<(usize, f64, usize, usize, f64)> = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || FasError::Format(format!("malformed trajectory line {}: '{line}'", n + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad());
        }
        recs.push((
            f[0].trim().parse().map_err(|_| bad())?,
            f[1].trim().parse().map_err(|_| bad())?,
            f[2].trim().parse().map_err(|_| bad())?,
            f[3].trim().parse().map_err(|_| bad())?,
            f[4].trim().parse().map_err(|_| bad())?,
        ));
    }
    if recs.is_empty() {
        return Err(FasError::Format("trajectory has no records".into()));
    }
    let steps = recs.iter().map(|r| r.0).max().expect("nonempty") + 1;
    let pts = recs.iter().map(|r| r.2).max().expect("nonempty") + 1;
    let chans = recs.iter().map(|r| r.3).max().expect("nonempty") + 1;
    let mut data = vec![Array2::from_elem((pts, chans), f64::NAN); steps];
    let mut times = vec![f64::NAN; steps];
    let mut seen = vec![0usize; steps];
    for (step, t, u, c, v) in recs {
        if seen[step] > 0 && times[step] != t {
            return Err(FasError::Format(format!("step {step} has more than one time")));
        }
        times[step] = t;
        if !data[step][[u, c]].is_nan() {
            return Err(FasError::Format(format!("duplicate value for step {step}, point {u}, channel {c}")));
        }
        data[step][[u, c]] = v;
        seen[step] += 1;
    }
    if let Some(step) = seen.iter().position(|&n| n != pts * chans) {
        return Err(FasError::Format(format!("step {step} is incomplete")));
    }
    times.into_iter().zip(data).map(|(t, full)| Ok((t, from_full(full)?))).collect()
}

pub fn load_csv(path: &Path) -> Result<Frames> {
    read_csv(BufReader::new(File::open(path)?))
}

/// Magic, u32 version, u64 frames, u64 grid points (endpoints included), u64 channels,
/// then per frame `t` followed by the row-major values. All little-endian.
pub fn write_fasp<W: Write>(w: &mut W, frames: &[(f64, PathSample)]) -> Result<()> {
    let (k, d) = frame_dims(frames)?;
    w.write_all(FASP_MAGIC)?;
    w.write_all(&FASP_VERSION.to_le_bytes())?;
    for n in [frames.len(), k + 2, d] {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for (t, path) in frames {
        w.write_all(&t.to_le_bytes())?;
        for v in path.full().iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_fasp(path: &Path, frames: &[(f64, PathSample)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_fasp(&mut w, frames)?;
    w.flush()?;
    Ok(())
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

pub fn read_fasp<R: Read>(r: &mut R) -> Result<Frames> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FASP_MAGIC {
        return Err(FasError::Format("not a FASP trajectory".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != FASP_VERSION {
        return Err(FasError::Format(format!("unsupported FASP version {version}")));
    }
    let frames = read_u64(r)? as usize;
    let pts = read_u64(r)? as usize;
    let chans = read_u64(r)? as usize;
    if frames == 0 || chans == 0 || pts < 3 || frames.saturating_mul(pts).saturating_mul(chans) > 1 << 32 {
        return Err(FasError::Format(format!("implausible FASP dimensions {frames} x {pts} x {chans}")));
    }
    let mut out = Vec::with_capacity(frames);
    for _ in 0..frames {
        let t = read_f64(r)?;
        let mut full = Array2::zeros((pts, chans));
        for x in full.iter_mut() {
            *x = read_f64(r)?;
        }
        out.push((t, from_full(full)?));
    }
    Ok(out)
}

pub fn load_fasp(path: &Path) -> Result<Frames> {
    read_fasp(&mut BufReader::new(File::open(path)?))
}

/// Load a `.csv` or `.fasp` file by extension.
pub fn load_trajectory(path: &Path) -> Result<Frames> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => load_csv(path),
        Some("fasp") => load_fasp(path),
        _ => Err(FasError::Format(format!("unknown trajectory extension: {}", path.display()))),
    }
}

/// Trajectory files of a directory, sorted by name.
pub fn trajectory_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "fasp")))
        .collect();
    files.sort();
    Ok(files)
}

/// Final frame of every trajectory in `dir`.
pub fn load_final_paths(dir: &Path) -> Result<Vec<PathSample>> {
    let files = trajectory_files(dir)?;
    if files.is_empty() {
        return Err(FasError::Format(format!("no trajectory files in {}", dir.display())));
    }
    files
        .iter()
        .map(|f| {
            let mut frames = load_trajectory(f)
                .map_err(|e| FasError::Format(format!("{}: {e}", f.display())))?;
            Ok(frames.pop().expect("readers return at least one frame").1)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn frames() -> Frames {
        let a = PathSample::new(array![[0.5, 1.0], [0.25, -3.0]], array![0.0, 0.0], array![1.0, 1.0]).unwrap();
        let mut b = a.clone();
        b.interior[[1, 1]] = 1.0 / 3.0;
        vec![(0.0, a), (0.75, b)]
    }

    #[test]
    fn csv_round_trip() {
        let f = frames();
        let mut buf = Vec::new();
        write_csv(&mut buf, &f).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 4 * 2);
        assert!(text.lines().any(|l| l.starts_with("1,7.5e-1,3,1,")));
        assert_eq!(read_csv(&buf[..]).unwrap(), f);
    }

    #[test]
    fn fasp_round_trip() {
        let f = frames();
        let mut buf = Vec::new();
        write_fasp(&mut buf, &f).unwrap();
        assert_eq!(&buf[..4], b"FASP");
        assert_eq!(buf.len(), 4 + 4 + 24 + 2 * 8 * (1 + 8));
        assert_eq!(read_fasp(&mut &buf[..]).unwrap(), f);
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_fasp(&mut &bad[..]).is_err());
        assert!(read_fasp(&mut &buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(read_csv(&b"a,b\n"[..]).is_err());
        assert!(read_csv(&b"step,t,u_index,channel,value\n0,0,0,0\n"[..]).is_err());
        let missing = "step,t,u_index,channel,value\n0,0,0,0,1\n0,0,1,0,1\n0,0,2,0,1\n1,1,0,0,1\n";
        assert!(read_csv(missing.as_bytes()).is_err());
    }

    #[test]
    fn directory_loading_uses_last_frame() {
        let dir = tempfile::tempdir().unwrap();
        let f = frames();
        save_csv(&dir.path().join("a.csv"), &f).unwrap();
        save_fasp(&dir.path().join("b.fasp"), &f[..1]).unwrap();
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let paths = load_final_paths(dir.path()).unwrap();
        assert_eq!(paths, vec![f[1].1.clone(), f[0].1.clone()]);
        let empty = tempfile::tempdir().unwrap();
        assert!(load_final_paths(empty.path()).is_err());
    }
}

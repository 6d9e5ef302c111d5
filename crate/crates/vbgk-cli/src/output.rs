//! Output directory handling: lockfile, manifest, field snapshots.
//!
//! A snapshot is two files. `<name>.f64` holds little-endian 64-bit floats,
//! 19 planes of `nx * ny` values each, row-major with `i` (the `x` index)
//! fastest. Planes 0..15 are the kinetic planes, plane `3 l + c` being
//! component `c` of `f_{l+1}`. Planes 15..19 are `rho`, `u1`, `u2` and the
//! pressure estimate `(rho - rho_bar) / eps^2`. `<name>.hdr` is a
//! `key = value` text header with the dimensions, time and parameters.

use anyhow::{bail, Context, Result};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use vbgk::kinetic_core::KineticField;
use vbgk::ModelParams;

pub const LOCK_NAME: &str = ".vbgk.lock";
pub const SNAPSHOT_PLANES: usize = 19;

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputDir {
    pub path: PathBuf,
    lock: PathBuf,
}

impl OutputDir {
    pub fn claim(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).with_context(|| format!("creating output directory {}", path.display()))?;
        let lock = path.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                writeln!(f, "pid = {}", std::process::id())?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                bail!(
                    "output directory {} is locked by another command ({}); remove the lockfile if no command is running",
                    path.display(),
                    lock.display()
                )
            }
            Err(e) => return Err(e).with_context(|| format!("creating lockfile {}", lock.display())),
        }
        Ok(Self { path: path.to_path_buf(), lock })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let p = self.file(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(BufWriter::new(File::create(&p).with_context(|| format!("writing {}", p.display()))?))
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        let mut w = self.create(name)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(())
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

/// Writes `<name>.f64` and `<name>.hdr` under `dir`.
pub fn write_snapshot(
    dir: &OutputDir,
    name: &str,
    field: &KineticField<f64>,
    params: &ModelParams,
    step: usize,
    t: f64,
) -> Result<()> {
    let g = field.grid;
    let hydro = field.moment_field().hydro(&params.cast::<f64>())?;
    let mut w = dir.create(&format!("{name}.f64"))?;
    for plane in [&field.data[..], &hydro.rho, &hydro.u.x, &hydro.u.y, &hydro.p_est] {
        for v in plane {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    let header = format!(
        "format = f64 little-endian\nnx = {}\nny = {}\nplanes = {SNAPSHOT_PLANES}\nplane_order = f1[0..3] f2[0..3] f3[0..3] f4[0..3] f5[0..3] rho u1 u2 p_est\nindex = j * nx + i\nstep = {step}\nt = {t:e}\nepsilon = {:e}\ntau = {:e}\nlambda = {:e}\nnu = {:e}\nrho_bar = {:e}\na = {:e}\n",
        g.nx,
        g.ny,
        params.epsilon(),
        params.tau(),
        params.lambda(),
        params.nu(),
        params.rho_bar(),
        params.a()
    );
    dir.write_text(&format!("{name}.hdr"), &header)
}

/// Reads a snapshot back as its 19 planes.
pub fn read_snapshot(path: &Path, nx: usize, ny: usize) -> Result<Vec<Vec<f64>>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let n = nx * ny;
    if bytes.len() != SNAPSHOT_PLANES * n * 8 {
        bail!("{} has {} bytes, expected {}", path.display(), bytes.len(), SNAPSHOT_PLANES * n * 8);
    }
    let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(vals.chunks(n).map(<[f64]>::to_vec).collect())
}

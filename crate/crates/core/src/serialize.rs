//! Self-describing binary files for replay and regression testing.
//!
//! Every record starts with a `CLRA` magic, a format version, and a record
//! tag. Dimensions are little-endian u64; complex entries follow as
//! interleaved real/imaginary little-endian f64 in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::channel::{effective_channel, ChannelRealization, Regime};
use crate::error::{Error, Result};
use crate::estimator::EstimatorOutput;
use crate::numerics::{check_finite, CMatrix, CVector};
use crate::protocol::ObservationSet;

const MAGIC: &[u8; 4] = b"CLRA";
const VERSION: u16 = 1;

const TAG_MATRIX: u16 = 1;
const TAG_REALIZATION: u16 = 2;
const TAG_OBSERVATIONS: u16 = 3;
const TAG_ESTIMATE: u16 = 4;

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn put_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn get_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn put_header<W: Write>(w: &mut W, tag: u16) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&tag.to_le_bytes())
}

fn expect_header<R: Read>(r: &mut R, tag: u16) -> Result<()> {
    let mut magic = [0u8; 4];
    let mut halves = [0u8; 2];
    let io = |e: std::io::Error| Error::Format(format!("truncated header: {e}"));
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, not a CLRA record".into()));
    }
    r.read_exact(&mut halves).map_err(io)?;
    let version = u16::from_le_bytes(halves);
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version} (expected {VERSION})"
        )));
    }
    r.read_exact(&mut halves).map_err(io)?;
    let got = u16::from_le_bytes(halves);
    if got != tag {
        return Err(Error::Format(format!(
            "unexpected record tag {got} (expected {tag})"
        )));
    }
    Ok(())
}

/// Writes a matrix body (no header): rows, cols, then row-major interleaved
/// re/im entries.
pub fn write_matrix_body<W: Write>(w: &mut W, m: &CMatrix) -> std::io::Result<()> {
    put_u64(w, m.nrows() as u64)?;
    put_u64(w, m.ncols() as u64)?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            put_f64(w, z.re)?;
            put_f64(w, z.im)?;
        }
    }
    Ok(())
}

/// Reads a matrix body written by [`write_matrix_body`].
pub fn read_matrix_body<R: Read>(r: &mut R) -> Result<CMatrix> {
    let io = |e: std::io::Error| Error::Format(format!("truncated matrix: {e}"));
    let rows = get_u64(r).map_err(io)? as usize;
    let cols = get_u64(r).map_err(io)? as usize;
    if rows.checked_mul(cols).is_none() || rows * cols > (1 << 32) {
        return Err(Error::Format(format!("implausible dimensions {rows}x{cols}")));
    }
    let mut entries = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let re = get_f64(r).map_err(io)?;
        let im = get_f64(r).map_err(io)?;
        entries.push(Complex64::new(re, im));
    }
    let m = CMatrix::from_row_iterator(rows, cols, entries);
    check_finite(&m, "deserialized matrix")?;
    Ok(m)
}

pub fn save_matrix(path: &Path, m: &CMatrix) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?);
    put_header(&mut w, TAG_MATRIX).map_err(io_err(path))?;
    write_matrix_body(&mut w, m).map_err(io_err(path))?;
    Ok(())
}

pub fn load_matrix(path: &Path) -> Result<CMatrix> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path).map_err(io_err(path))?);
    expect_header(&mut r, TAG_MATRIX)?;
    read_matrix_body(&mut r)
}

fn regime_byte(r: Regime) -> u8 {
    match r {
        Regime::Near => 0,
        Regime::Far => 1,
    }
}

fn byte_regime(b: u8) -> Result<Regime> {
    match b {
        0 => Ok(Regime::Near),
        1 => Ok(Regime::Far),
        other => Err(Error::Format(format!("unknown regime byte {other}"))),
    }
}

/// Saves a channel realization: regimes, per-user distances, `F`, and the
/// `H_k`'s. The effective cascades are rebuilt on load.
pub fn save_realization(path: &Path, real: &ChannelRealization) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?);
    let io = io_err(path);
    put_header(&mut w, TAG_REALIZATION).map_err(&io)?;
    put_u64(&mut w, real.ris_user.len() as u64).map_err(&io)?;
    w.write_all(&[regime_byte(real.regime_bs_ris)]).map_err(&io)?;
    for &r in &real.regime_ris_user {
        w.write_all(&[regime_byte(r)]).map_err(&io)?;
    }
    for &d in &real.user_distances {
        put_f64(&mut w, d).map_err(&io)?;
    }
    write_matrix_body(&mut w, &real.bs_ris).map_err(&io)?;
    for h in &real.ris_user {
        write_matrix_body(&mut w, h).map_err(&io)?;
    }
    Ok(())
}

pub fn load_realization(path: &Path) -> Result<ChannelRealization> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path).map_err(io_err(path))?);
    expect_header(&mut r, TAG_REALIZATION)?;
    let io = |e: std::io::Error| Error::Format(format!("truncated realization: {e}"));
    let users = get_u64(&mut r).map_err(io)? as usize;
    let mut byte = [0u8; 1];
    r.read_exact(&mut byte).map_err(io)?;
    let regime_bs_ris = byte_regime(byte[0])?;
    let mut regime_ris_user = Vec::with_capacity(users);
    for _ in 0..users {
        r.read_exact(&mut byte).map_err(io)?;
        regime_ris_user.push(byte_regime(byte[0])?);
    }
    let mut user_distances = Vec::with_capacity(users);
    for _ in 0..users {
        user_distances.push(get_f64(&mut r).map_err(io)?);
    }
    let bs_ris = read_matrix_body(&mut r)?;
    let mut ris_user = Vec::with_capacity(users);
    for _ in 0..users {
        ris_user.push(read_matrix_body(&mut r)?);
    }
    let h_eff = ris_user
        .iter()
        .map(|h| effective_channel(&bs_ris, h))
        .collect();
    Ok(ChannelRealization {
        bs_ris,
        ris_user,
        h_eff,
        regime_bs_ris,
        regime_ris_user,
        user_distances,
    })
}

pub fn save_observations(path: &Path, obs: &ObservationSet) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?);
    let io = io_err(path);
    put_header(&mut w, TAG_OBSERVATIONS).map_err(&io)?;
    put_u64(&mut w, obs.sample_count as u64).map_err(&io)?;
    put_u64(&mut w, obs.m_row.len() as u64).map_err(&io)?;
    write_matrix_body(&mut w, &obs.m_col).map_err(&io)?;
    for m in &obs.m_row {
        write_matrix_body(&mut w, m).map_err(&io)?;
    }
    Ok(())
}

pub fn load_observations(path: &Path) -> Result<ObservationSet> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path).map_err(io_err(path))?);
    expect_header(&mut r, TAG_OBSERVATIONS)?;
    let io = |e: std::io::Error| Error::Format(format!("truncated observations: {e}"));
    let sample_count = get_u64(&mut r).map_err(io)? as usize;
    let rows = get_u64(&mut r).map_err(io)? as usize;
    let m_col = read_matrix_body(&mut r)?;
    let mut m_row = Vec::with_capacity(rows);
    for _ in 0..rows {
        m_row.push(read_matrix_body(&mut r)?);
    }
    Ok(ObservationSet {
        m_col,
        m_row,
        sample_count,
    })
}

/// Saves an estimator output: rank and flags, the basis, coefficient matrix,
/// diagonal scalings, loss trajectory, and the reconstructed cascades.
pub fn save_estimate(path: &Path, out: &EstimatorOutput) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?);
    let io = io_err(path);
    put_header(&mut w, TAG_ESTIMATE).map_err(&io)?;
    put_u64(&mut w, out.rank_hat as u64).map_err(&io)?;
    let flags = (out.rank_clamped as u8) | ((out.mdl_degenerate as u8) << 1);
    w.write_all(&[flags]).map_err(&io)?;
    put_u64(&mut w, out.degenerate_columns as u64).map_err(&io)?;
    put_u64(&mut w, out.h_eff_hat.len() as u64).map_err(&io)?;
    put_u64(&mut w, out.h_eff_hat.first().map_or(0, |v| v.len()) as u64).map_err(&io)?;
    write_matrix_body(&mut w, &out.s_hat).map_err(&io)?;
    write_matrix_body(&mut w, &out.t_hat).map_err(&io)?;
    put_u64(&mut w, out.d_hat.len() as u64).map_err(&io)?;
    for d in &out.d_hat {
        let as_matrix = CMatrix::from_column_slice(d.len(), 1, d.as_slice());
        write_matrix_body(&mut w, &as_matrix).map_err(&io)?;
    }
    put_u64(&mut w, out.loss_trajectory.len() as u64).map_err(&io)?;
    for &v in &out.loss_trajectory {
        put_f64(&mut w, v).map_err(&io)?;
    }
    for per_user in &out.h_eff_hat {
        for m in per_user {
            write_matrix_body(&mut w, m).map_err(&io)?;
        }
    }
    Ok(())
}

pub fn load_estimate(path: &Path) -> Result<EstimatorOutput> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path).map_err(io_err(path))?);
    expect_header(&mut r, TAG_ESTIMATE)?;
    let io = |e: std::io::Error| Error::Format(format!("truncated estimate: {e}"));
    let rank_hat = get_u64(&mut r).map_err(io)? as usize;
    let mut byte = [0u8; 1];
    r.read_exact(&mut byte).map_err(io)?;
    let rank_clamped = byte[0] & 1 != 0;
    let mdl_degenerate = byte[0] & 2 != 0;
    let degenerate_columns = get_u64(&mut r).map_err(io)? as usize;
    let users = get_u64(&mut r).map_err(io)? as usize;
    let l = get_u64(&mut r).map_err(io)? as usize;
    let s_hat = read_matrix_body(&mut r)?;
    let t_hat = read_matrix_body(&mut r)?;
    let d_count = get_u64(&mut r).map_err(io)? as usize;
    let mut d_hat = Vec::with_capacity(d_count);
    for _ in 0..d_count {
        let m = read_matrix_body(&mut r)?;
        d_hat.push(CVector::from_column_slice(m.as_slice()));
    }
    let traj_len = get_u64(&mut r).map_err(io)? as usize;
    let mut loss_trajectory = Vec::with_capacity(traj_len);
    for _ in 0..traj_len {
        loss_trajectory.push(get_f64(&mut r).map_err(io)?);
    }
    let mut h_eff_hat = Vec::with_capacity(users);
    for _ in 0..users {
        let mut per_user = Vec::with_capacity(l);
        for _ in 0..l {
            per_user.push(read_matrix_body(&mut r)?);
        }
        h_eff_hat.push(per_user);
    }
    Ok(EstimatorOutput {
        rank_hat,
        rank_clamped,
        mdl_degenerate,
        s_hat,
        t_hat,
        d_hat,
        h_eff_hat,
        loss_trajectory,
        degenerate_columns,
    })
}

/// Writes a loss trajectory as a single-column CSV with an `iteration` index.
pub fn write_loss_csv(path: &Path, trajectory: &[f64]) -> Result<()> {
    let mut body = String::from("iteration,loss\n");
    for (i, v) in trajectory.iter().enumerate() {
        body.push_str(&format!("{i},{v:.12e}\n"));
    }
    std::fs::write(path, body).map_err(io_err(path))
}

//! Plain artifact formats: CSV tables, text matrices, PPM images, and
//! binary state and shot dumps with a one-line JSON header.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{MomentumHistogram, ShotRecord};
use crate::params::MapParams;
use crate::state::{momentum_at, theta_at, Basis, StateVector};

const STATE_FORMAT: &str = "sawtooth-state";
const SHOTS_FORMAT: &str = "sawtooth-shots";

/// CSV with a header row and equally long numeric columns.
pub fn write_csv<W: Write>(w: &mut W, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    if header.len() != columns.len() {
        return Err(Error::Format(format!(
            "{} headers for {} columns",
            header.len(),
            columns.len()
        )));
    }
    let rows = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::Format("columns differ in length".into()));
    }
    writeln!(w, "{}", header.join(","))?;
    for r in 0..rows {
        let line: Vec<String> = columns.iter().map(|c| c[r].to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_histogram_csv<W: Write>(w: &mut W, hist: &MomentumHistogram) -> Result<()> {
    writeln!(w, "n_lo,n_hi,center,probability,density,count")?;
    for b in 0..hist.bins() {
        let count = hist
            .counts
            .as_ref()
            .map_or(String::new(), |c| c[b].to_string());
        writeln!(
            w,
            "{},{},{},{},{},{}",
            hist.edges[b],
            hist.edges[b + 1] - 1,
            hist.center(b),
            hist.probabilities[b],
            hist.density(b),
            count
        )?;
    }
    Ok(())
}

/// `|psi|^2` on the grid of the state's basis.
pub fn write_probabilities_csv<W: Write>(w: &mut W, psi: &StateVector) -> Result<()> {
    let n = psi.dim();
    match psi.basis() {
        Basis::Theta => writeln!(w, "index,theta,probability")?,
        Basis::Momentum => writeln!(w, "index,n,probability")?,
    }
    for (j, a) in psi.amplitudes().iter().enumerate() {
        match psi.basis() {
            Basis::Theta => writeln!(w, "{j},{},{}", theta_at(j, n), a.norm_sqr())?,
            Basis::Momentum => writeln!(w, "{j},{},{}", momentum_at(j, n), a.norm_sqr())?,
        }
    }
    Ok(())
}

/// Row-major whitespace-separated matrix, one row per line.
pub fn write_matrix<W: Write>(w: &mut W, cols: usize, values: &[f64]) -> Result<()> {
    if cols == 0 || values.len() % cols != 0 {
        return Err(Error::Format(format!("{} values do not fill rows of {cols}", values.len())));
    }
    for row in values.chunks(cols) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<(usize, Vec<f64>)> {
    let mut cols = None;
    let mut values = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| Error::Format(format!("{t:?}: {e}"))))
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => return Err(Error::Format("ragged matrix".into())),
            _ => {}
        }
        values.extend(row);
    }
    Ok((cols.unwrap_or(0), values))
}

/// Blue for zero through cyan, green and yellow to red for one.
pub fn colormap(v: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 5] = [
        [0.0, 0.0, 1.0],
        [0.0, 1.0, 1.0],
        [0.0, 1.0, 0.0],
        [1.0, 1.0, 0.0],
        [1.0, 0.0, 0.0],
    ];
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    let x = v * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let mut rgb = [0u8; 3];
    for c in 0..3 {
        let val = STOPS[i][c] + f * (STOPS[i + 1][c] - STOPS[i][c]);
        rgb[c] = (255.0 * val).round() as u8;
    }
    rgb
}

/// Binary PPM of a row-major matrix, scaled so the maximum maps to red.
pub fn write_ppm<W: Write>(w: &mut W, cols: usize, values: &[f64]) -> Result<()> {
    if cols == 0 || values.len() % cols != 0 {
        return Err(Error::Format(format!("{} values do not fill rows of {cols}", values.len())));
    }
    let rows = values.len() / cols;
    let max = values.iter().copied().fold(0.0, f64::max);
    write!(w, "P6\n{cols} {rows}\n255\n")?;
    let mut pixels = Vec::with_capacity(values.len() * 3);
    for &v in values {
        let scaled = if max > 0.0 { v / max } else { 0.0 };
        pixels.extend_from_slice(&colormap(scaled));
    }
    w.write_all(&pixels)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StateHeader {
    format: String,
    n_q: u32,
    basis: Basis,
    params: MapParams,
}

/// JSON header line followed by `N` little-endian `(re, im)` f64 pairs.
pub fn write_state<W: Write>(w: &mut W, psi: &StateVector) -> Result<()> {
    let header = StateHeader {
        format: STATE_FORMAT.into(),
        n_q: psi.n_q(),
        basis: psi.basis(),
        params: *psi.params(),
    };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    let mut bytes = Vec::with_capacity(psi.dim() * 16);
    for a in psi.amplitudes() {
        bytes.extend_from_slice(&a.re.to_le_bytes());
        bytes.extend_from_slice(&a.im.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

fn read_header_line<R: BufRead>(r: &mut R) -> Result<String> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.is_empty() {
        return Err(Error::Format("missing header line".into()));
    }
    Ok(line)
}

pub fn read_state<R: BufRead>(mut r: R) -> Result<StateVector> {
    let header: StateHeader = serde_json::from_str(&read_header_line(&mut r)?)?;
    if header.format != STATE_FORMAT {
        return Err(Error::Format(format!("unexpected format {:?}", header.format)));
    }
    if header.n_q == 0 || header.n_q > 30 {
        return Err(Error::Format(format!("bad register size {}", header.n_q)));
    }
    let n = 1usize << header.n_q;
    let mut bytes = vec![0u8; n * 16];
    r.read_exact(&mut bytes)?;
    let amps = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    StateVector::from_amplitudes(amps, header.basis, header.params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ShotHeader {
    format: String,
    grid: usize,
    seed: u64,
    truncated_to_qubits: Option<u32>,
    shots: usize,
}

/// JSON header line followed by one little-endian i32 per outcome.
pub fn write_shots<W: Write>(w: &mut W, record: &ShotRecord) -> Result<()> {
    let header = ShotHeader {
        format: SHOTS_FORMAT.into(),
        grid: record.grid,
        seed: record.seed,
        truncated_to_qubits: record.truncated_to_qubits,
        shots: record.outcomes.len(),
    };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    let mut bytes = Vec::with_capacity(record.outcomes.len() * 4);
    for &o in &record.outcomes {
        let v = i32::try_from(o).map_err(|_| Error::Format(format!("outcome {o} exceeds i32")))?;
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_shots<R: BufRead>(mut r: R) -> Result<ShotRecord> {
    let header: ShotHeader = serde_json::from_str(&read_header_line(&mut r)?)?;
    if header.format != SHOTS_FORMAT {
        return Err(Error::Format(format!("unexpected format {:?}", header.format)));
    }
    let mut bytes = vec![0u8; header.shots * 4];
    r.read_exact(&mut bytes)?;
    Ok(ShotRecord {
        outcomes: bytes
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes(c.try_into().unwrap()) as i64)
            .collect(),
        grid: header.grid,
        seed: header.seed,
        truncated_to_qubits: header.truncated_to_qubits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::histogram_exact;

    #[test]
    fn state_round_trip_is_exact() {
        let p = MapParams::torus(-0.1, 1, 5).unwrap();
        let psi = StateVector::random(p, Basis::Momentum, 9).unwrap();
        let mut buf = Vec::new();
        write_state(&mut buf, &psi).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count() >= 1, true);
        let back = read_state(&buf[..]).unwrap();
        assert_eq!(back, psi);
        assert!(read_state(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn shots_round_trip() {
        let rec = ShotRecord {
            outcomes: vec![-16, 0, 15, 3],
            grid: 32,
            seed: 4,
            truncated_to_qubits: None,
        };
        let mut buf = Vec::new();
        write_shots(&mut buf, &rec).unwrap();
        assert_eq!(read_shots(&buf[..]).unwrap(), rec);
    }

    #[test]
    fn matrix_round_trip() {
        let values = vec![0.1, 1e-300, -2.5, 1.0 / 3.0, 0.0, 7.0];
        let mut buf = Vec::new();
        write_matrix(&mut buf, 3, &values).unwrap();
        let (cols, back) = read_matrix(&buf[..]).unwrap();
        assert_eq!((cols, back), (3, values));
        assert!(write_matrix(&mut Vec::new(), 4, &[1.0; 6]).is_err());
    }

    #[test]
    fn colormap_ends() {
        assert_eq!(colormap(0.0), [0, 0, 255]);
        assert_eq!(colormap(1.0), [255, 0, 0]);
        assert_eq!(colormap(2.0), [255, 0, 0]);
        assert_eq!(colormap(0.5), [0, 255, 0]);
    }

    #[test]
    fn ppm_layout() {
        let mut buf = Vec::new();
        write_ppm(&mut buf, 2, &[0.0, 1.0, 0.5, 0.0]).unwrap();
        let header = b"P6\n2 2\n255\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(&buf[header.len()..header.len() + 6], &[0, 0, 255, 255, 0, 0]);
        assert_eq!(buf.len(), header.len() + 12);
    }

    #[test]
    fn csv_tables() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &["t", "msd"], &[&[0.0, 1.0], &[0.0, 2.5]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,msd\n0,0\n1,2.5\n");
        assert!(write_csv(&mut Vec::new(), &["a"], &[&[1.0], &[2.0]]).is_err());
        let h = histogram_exact(&[0.25; 4], 2).unwrap();
        let mut buf = Vec::new();
        write_histogram_csv(&mut buf, &h).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "-2,-1,-1.5,0.5,0.25,");
    }
}

//! Plot-ready CSV emitters with fixed headers.
//!
//! Numbers are written with Rust's shortest round-trip `{:e}` formatting so
//! identical inputs give byte-identical files.

use std::io::{self, Write};

use num_complex::Complex64;

use super::render::HeterodyneTrace;

pub const TRACE_HEADER: &str = "t_s,re,im,abs";
pub const SWEEP_HEADER: &str = "axis,eta";
pub const SPECTRUM_HEADER: &str = "f_hz,re,im,abs";
pub const HETERODYNE_HEADER: &str = "t_s,v_if,envelope";
pub const INTENSITY_MAP_HEADER: &str = "t_close_s,delay_s,abs";
pub const BANDWIDTH_HEADER: &str = "delta_hz,bandwidth_hz,eta";

pub fn write_trace<W: Write>(mut w: W, time: &[f64], field: &[Complex64]) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for (t, z) in time.iter().zip(field) {
        writeln!(w, "{:e},{:e},{:e},{:e}", t, z.re, z.im, z.norm())?;
    }
    Ok(())
}

pub fn write_sweep<W: Write>(mut w: W, axis: &[f64], eta: &[f64]) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for (x, e) in axis.iter().zip(eta) {
        writeln!(w, "{x:e},{e:e}")?;
    }
    Ok(())
}

pub fn write_spectrum<W: Write>(mut w: W, freqs: &[f64], s21: &[Complex64]) -> io::Result<()> {
    writeln!(w, "{SPECTRUM_HEADER}")?;
    for (f, z) in freqs.iter().zip(s21) {
        writeln!(w, "{:e},{:e},{:e},{:e}", f, z.re, z.im, z.norm())?;
    }
    Ok(())
}

pub fn write_heterodyne<W: Write>(mut w: W, trace: &HeterodyneTrace) -> io::Result<()> {
    writeln!(w, "{HETERODYNE_HEADER}")?;
    for ((t, v), e) in trace.time.iter().zip(&trace.voltage).zip(&trace.envelope) {
        writeln!(w, "{t:e},{v:e},{e:e}")?;
    }
    Ok(())
}

/// Rows of `(close time, delay after input peak, |s|)`.
pub fn write_intensity_map<W: Write>(mut w: W, rows: &[(f64, f64, f64)]) -> io::Result<()> {
    writeln!(w, "{INTENSITY_MAP_HEADER}")?;
    for (tc, d, a) in rows {
        writeln!(w, "{tc:e},{d:e},{a:e}")?;
    }
    Ok(())
}

/// Rows of `(Δ, bandwidth, best efficiency)`.
pub fn write_bandwidth<W: Write>(mut w: W, rows: &[(f64, f64, f64)]) -> io::Result<()> {
    writeln!(w, "{BANDWIDTH_HEADER}")?;
    for (d, b, e) in rows {
        writeln!(w, "{d:e},{b:e},{e:e}")?;
    }
    Ok(())
}

//! Piecewise-constant detuning protocols: write, close (freeze) and read.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::CombConfig;

/// Common detuning (Hz) the resonators are parked at during a close stage.
pub const DEFAULT_CLOSE_DETUNING: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Write,
    Close,
    Read,
}

impl Stage {
    pub fn is_close(self) -> bool {
        self == Stage::Close
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub stage: Stage,
    pub detunings: Vec<f64>,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }
}

/// Ordered, contiguous list of segments starting at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningSchedule {
    segments: Vec<Segment>,
}

impl DetuningSchedule {
    /// Builds a schedule and checks contiguity, equal resonator counts and
    /// the all-equal rule for close segments.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let schedule = Self { segments };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .segments
            .first()
            .ok_or_else(|| invalid!("schedule has no segments"))?;
        if first.t_start != 0.0 {
            return Err(invalid!(
                "schedule must start at t = 0, starts at {}",
                first.t_start
            ));
        }
        let n = first.detunings.len();
        if n == 0 {
            return Err(invalid!("segments must carry at least one detuning"));
        }
        let mut prev_end = 0.0;
        for (k, seg) in self.segments.iter().enumerate() {
            if !(seg.t_start.is_finite() && seg.t_end.is_finite()) || seg.t_end <= seg.t_start {
                return Err(invalid!(
                    "segment {k} has an empty or non-finite interval [{}, {})",
                    seg.t_start,
                    seg.t_end
                ));
            }
            if seg.t_start != prev_end {
                return Err(invalid!(
                    "segment {k} starts at {} but the previous one ends at {prev_end}",
                    seg.t_start
                ));
            }
            if seg.detunings.len() != n {
                return Err(invalid!(
                    "segment {k} has {} detunings, expected {n}",
                    seg.detunings.len()
                ));
            }
            if seg.detunings.iter().any(|d| !d.is_finite()) {
                return Err(invalid!("segment {k} has a non-finite detuning"));
            }
            if seg.stage.is_close() && seg.detunings.iter().any(|&d| d != seg.detunings[0]) {
                return Err(invalid!("close segment {k} must have all detunings equal"));
            }
            prev_end = seg.t_end;
        }
        Ok(())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn n_resonators(&self) -> usize {
        self.segments[0].detunings.len()
    }

    pub fn end(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t_end)
    }

    /// Segment active at `t`; the final segment also owns its end point.
    pub fn segment_at(&self, t: f64) -> Option<&Segment> {
        self.segments
            .iter()
            .find(|s| s.contains(t))
            .or_else(|| self.segments.last().filter(|s| t == s.t_end))
    }

    /// Total close time elapsed in `[0, t)`.
    pub fn close_time_before(&self, t: f64) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.stage.is_close())
            .map(|s| (t.min(s.t_end) - s.t_start).max(0.0))
            .sum()
    }

    /// Earliest time `t >= t0` at which `comb_time` of non-close evolution has
    /// accumulated since `t0`. Evolution is taken to continue past the end of
    /// the schedule with the last segment's character.
    pub fn advance_comb_clock(&self, t0: f64, comb_time: f64) -> f64 {
        let mut remaining = comb_time;
        let mut t = t0;
        for seg in &self.segments {
            if seg.t_end <= t {
                continue;
            }
            let start = seg.t_start.max(t);
            if seg.stage.is_close() {
                t = seg.t_end;
                continue;
            }
            let available = seg.t_end - start;
            if remaining <= available {
                return start + remaining;
            }
            remaining -= available;
            t = seg.t_end;
        }
        match self.segments.last() {
            Some(last) if last.stage.is_close() => f64::INFINITY,
            _ => t + remaining,
        }
    }

    /// Stretches or trims the last segment so the schedule ends at `t_end`.
    pub fn with_end(mut self, t_end: f64) -> Result<Self> {
        let last = self
            .segments
            .last_mut()
            .expect("validated schedule is non-empty");
        if t_end <= last.t_start {
            return Err(invalid!(
                "new end {t_end} falls before the last segment start {}",
                last.t_start
            ));
        }
        last.t_end = t_end;
        Ok(self)
    }

    /// Same protocol with every boundary moved to the nearest multiple of `dt`.
    /// Segments that collapse to zero length are dropped.
    pub fn snapped(&self, dt: f64) -> Result<Self> {
        let snap = |t: f64| (t / dt).round() * dt;
        let mut out: Vec<Segment> = Vec::with_capacity(self.segments.len());
        for seg in &self.segments {
            let (a, b) = (snap(seg.t_start), snap(seg.t_end));
            if b > a {
                let mut s = seg.clone();
                s.t_start = out.last().map_or(0.0, |p| p.t_end);
                s.t_end = b;
                out.push(s);
            }
        }
        if out.is_empty() {
            return Err(invalid!("schedule shorter than one time step {dt}"));
        }
        Self::new(out)
    }
}

/// Single write segment holding the comb for the whole run.
pub fn static_comb(comb: &CombConfig, t_end: f64) -> Result<DetuningSchedule> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(invalid!("t_end must be positive, got {t_end}"));
    }
    DetuningSchedule::new(vec![Segment {
        t_start: 0.0,
        t_end,
        stage: Stage::Write,
        detunings: comb.detunings.clone(),
    }])
}

/// Write on `[0, t_write_end)`, close for `t_close`, then read until `t_end`.
pub fn write_close_read(
    comb: &CombConfig,
    t_write_end: f64,
    t_close: f64,
    t_end: f64,
) -> Result<DetuningSchedule> {
    if !(t_write_end.is_finite() && t_write_end > 0.0) {
        return Err(invalid!("t_write_end must be positive, got {t_write_end}"));
    }
    if !(t_close.is_finite() && t_close >= 0.0) {
        return Err(invalid!("t_close must be non-negative, got {t_close}"));
    }
    let windows = if t_close > 0.0 {
        vec![(t_write_end, t_write_end + t_close)]
    } else {
        Vec::new()
    };
    multimode_schedule(comb, t_write_end, &windows, t_end)
}

/// Write stage followed by alternating read and close stages.
///
/// Each `(start, end)` window parks every resonator at the common close
/// detuning; between windows the comb is restored. An empty window list
/// yields the static comb.
pub fn multimode_schedule(
    comb: &CombConfig,
    t_write_end: f64,
    close_windows: &[(f64, f64)],
    t_end: f64,
) -> Result<DetuningSchedule> {
    close_windows_schedule(
        comb,
        t_write_end,
        close_windows,
        t_end,
        DEFAULT_CLOSE_DETUNING,
    )
}

pub fn close_windows_schedule(
    comb: &CombConfig,
    t_write_end: f64,
    close_windows: &[(f64, f64)],
    t_end: f64,
    close_detuning: f64,
) -> Result<DetuningSchedule> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(invalid!("t_end must be positive, got {t_end}"));
    }
    if !(t_write_end.is_finite() && t_write_end > 0.0) {
        return Err(invalid!("t_write_end must be positive, got {t_write_end}"));
    }
    if !close_detuning.is_finite() {
        return Err(invalid!("close detuning must be finite"));
    }
    let mut prev = t_write_end;
    for &(a, b) in close_windows {
        if !(a.is_finite() && b.is_finite()) || b < a {
            return Err(invalid!("close window ({a}, {b}) has negative duration"));
        }
        if a < prev {
            return Err(invalid!(
                "close window ({a}, {b}) overlaps the write stage or a previous window ending at {prev}"
            ));
        }
        prev = b;
    }
    if prev > t_end {
        return Err(invalid!("close windows extend past t_end = {t_end}"));
    }

    let n = comb.len();
    let mut segments: Vec<Segment> = Vec::new();
    let mut push = |t_start: f64, t_end: f64, stage: Stage| {
        if t_end <= t_start {
            return;
        }
        let detunings = if stage.is_close() {
            vec![close_detuning; n]
        } else {
            comb.detunings.clone()
        };
        match segments.last_mut() {
            // comb stages separated by nothing are one continuous stage
            Some(last) if !last.stage.is_close() && !stage.is_close() => last.t_end = t_end,
            _ => segments.push(Segment {
                t_start,
                t_end,
                stage,
                detunings,
            }),
        }
    };
    let mut cursor = 0.0;
    push(cursor, t_write_end.min(t_end), Stage::Write);
    cursor = t_write_end.min(t_end);
    for &(a, b) in close_windows {
        push(cursor, a, Stage::Read);
        push(a, b, Stage::Close);
        cursor = b;
    }
    push(cursor, t_end, Stage::Read);
    DetuningSchedule::new(segments)
}

/// Appends a close stage from `t_after_first_echo` to the end of `base`,
/// parking the resonators so later echo orders stay stored.
pub fn echo_suppression(
    base: &DetuningSchedule,
    t_after_first_echo: f64,
) -> Result<DetuningSchedule> {
    if !(t_after_first_echo.is_finite() && t_after_first_echo >= 0.0) {
        return Err(invalid!(
            "suppression start must be a non-negative time, got {t_after_first_echo}"
        ));
    }
    if t_after_first_echo >= base.end() {
        return Ok(base.clone());
    }
    if base.segments().iter().all(|s| s.stage.is_close()) {
        return Err(invalid!("schedule has no comb stage to suppress"));
    }
    let active = base
        .segment_at(t_after_first_echo)
        .expect("time lies inside the schedule");
    if active.stage.is_close() {
        return Err(invalid!(
            "suppression start {t_after_first_echo} falls inside an existing close stage"
        ));
    }
    let n = base.n_resonators();
    let mut segments: Vec<Segment> = base
        .segments()
        .iter()
        .filter(|s| s.t_start < t_after_first_echo)
        .cloned()
        .collect();
    if let Some(last) = segments.last_mut() {
        last.t_end = t_after_first_echo;
    }
    segments.push(Segment {
        t_start: t_after_first_echo,
        t_end: base.end(),
        stage: Stage::Close,
        detunings: vec![DEFAULT_CLOSE_DETUNING; n],
    });
    DetuningSchedule::new(segments)
}

//! Boxcar/demodulation statistics and back-action spectra from trajectory CSVs.

use std::path::Path;

use atomcurrent::signal::{backaction_spectrum, demodulate, integrate_window, snr, MIN_SPECTRUM_RECORDS};
use atomcurrent::TrajectoryRecord;

use crate::output::{Table, NOISE_SCHEMA, SME_SCHEMA, STATS_SCHEMA, TRAJECTORY_SCHEMA};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOptions {
    /// Window length `T`.
    pub window: f64,
    pub channel: usize,
    /// Demodulation frequency; plain boxcar when absent.
    pub demod: Option<f64>,
    /// Start of the first window.
    pub start: f64,
    /// Time range for the back-action spectrum, whole record when absent.
    pub spectrum_range: Option<(f64, f64)>,
    /// `S_eta[0]` to use when the spectrum cannot be estimated.
    pub s_eta0: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub stats: Table,
    pub spectrum: Option<Table>,
    pub s_eta0: f64,
}

fn meta<T: std::str::FromStr>(t: &Table, key: &str, path: &Path) -> Result<T, CliError> {
    t.meta_value(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CliError::Config(format!("{}: missing or bad `{key}`", path.display())))
}

/// Rebuilds a record from a trajectory or SME table.
pub fn read_record(path: &Path) -> Result<TrajectoryRecord, CliError> {
    let t = Table::read(path, Some(&[TRAJECTORY_SCHEMA, SME_SCHEMA]))?;
    let k: usize = meta(&t, "channels", path)?;
    let mut labels = Vec::with_capacity(k);
    let mut gammas = Vec::with_capacity(k);
    for c in 0..k {
        labels.push(t.meta_value(&format!("channel{c}.label")).unwrap_or_default().to_string());
        gammas.push(meta(&t, &format!("channel{c}.gamma"), path)?);
    }
    let col = |name: &str| {
        t.column(name)
            .ok_or_else(|| CliError::Config(format!("{}: missing column `{name}`", path.display())))
    };
    let tc = col("t")?;
    let dq_cols = (0..k).map(|c| col(&format!("dq_{c}"))).collect::<Result<Vec<_>, _>>()?;
    let x_cols = (0..k).map(|c| col(&format!("x_{c}"))).collect::<Result<Vec<_>, _>>()?;
    let drift_col = t.header.len() - 1;
    let probe_cols: Vec<usize> = (1 + 2 * k..drift_col).collect();
    Ok(TrajectoryRecord {
        times: t.rows.iter().map(|r| r[tc]).collect(),
        channel_labels: labels,
        channel_gammas: gammas,
        dq: t.rows.iter().map(|r| dq_cols.iter().map(|&c| r[c]).collect()).collect(),
        quadratures: t.rows.iter().map(|r| x_cols.iter().map(|&c| r[c]).collect()).collect(),
        probe_names: probe_cols.iter().map(|&c| t.header[c].clone()).collect(),
        observables: t.rows.iter().map(|r| probe_cols.iter().map(|&c| r[c]).collect()).collect(),
        norm_drift: t.rows.iter().map(|r| r[drift_col]).collect(),
        seed: meta(&t, "seed", path)?,
        stream: meta(&t, "stream", path)?,
        dt: meta(&t, "dt", path)?,
        snapshots: Vec::new(),
        final_state: None,
    })
}

/// Per-window `I_T` and SNR for every record, plus the averaged back-action
/// spectrum when there are enough records.
pub fn filter_records(records: &[TrajectoryRecord], opt: &FilterOptions) -> Result<FilterOutput, CliError> {
    if records.is_empty() {
        return Err(CliError::Config("filter: no records".into()));
    }
    if !(opt.window > 0.0) || !opt.window.is_finite() {
        return Err(CliError::Config(format!("--window: must be positive, got {}", opt.window)));
    }
    for (i, r) in records.iter().enumerate() {
        if opt.channel >= r.channel_labels.len() {
            return Err(CliError::Config(format!(
                "--channel: record {i} has {} monitored channels",
                r.channel_labels.len()
            )));
        }
    }
    let spectrum = if records.len() >= MIN_SPECTRUM_RECORDS {
        let (t0, t1) = opt.spectrum_range.unwrap_or((0.0, records[0].duration()));
        Some(backaction_spectrum(records, opt.channel, t0, t1, None)?)
    } else {
        None
    };
    let s_eta0 = match (&spectrum, opt.s_eta0) {
        (_, Some(v)) => v,
        (Some(s), None) => s.at_zero(),
        (None, None) => {
            log::warn!(
                "fewer than {MIN_SPECTRUM_RECORDS} records: S_eta[0] set to 0 (pass --s-eta0 to override)"
            );
            0.0
        }
    };
    let mut stats = Table::new(
        STATS_SCHEMA,
        vec![
            "record".into(),
            "window_start".into(),
            "integral".into(),
            "s_bar".into(),
            "snr".into(),
        ],
    )
    .meta("window", opt.window)
    .meta("channel", opt.channel)
    .meta("filter", opt.demod.map(|w| format!("demod:{w}")).unwrap_or_else(|| "boxcar".into()))
    .meta("s_eta0", s_eta0)
    .meta("s_xi0", 1.0);
    for (i, r) in records.iter().enumerate() {
        let mut t0 = opt.start;
        while t0 + opt.window <= r.duration() + 1e-9 * opt.window {
            let integral = match opt.demod {
                Some(w) => demodulate(r, opt.channel, w, t0, opt.window)?,
                None => integrate_window(r, opt.channel, t0, opt.window)?,
            };
            let s_bar = integral / opt.window;
            let s = snr(opt.window, s_bar, s_eta0, None);
            stats.rows.push(vec![i as f64, t0, integral, s_bar, s.snr]);
            t0 += opt.window;
        }
    }
    let spectrum = spectrum.map(|s| {
        let mut t = Table::new(NOISE_SCHEMA, vec!["omega".into(), "s_eta".into()])
            .meta("window", &s.window)
            .meta("records", records.len())
            .meta("normalization", "two-sided, dt |FFT|^2 / sum w^2");
        t.rows = s.omega.iter().zip(&s.power).map(|(w, p)| vec![*w, *p]).collect();
        t
    });
    Ok(FilterOutput {
        stats,
        spectrum,
        s_eta0,
    })
}

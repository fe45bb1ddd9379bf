//! Run artifacts: `run.csv`, `summary.txt`, `plot.gp`.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::time::Duration;

use crate::sim::{RunRecord, RunRow, Scenario};

/// Bumped whenever a column is added, removed, renamed or reordered.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 45] = [
    "t",
    "roll", "pitch", "yaw",
    "roll_hat", "pitch_hat", "yaw_hat",
    "px", "py", "pz",
    "px_hat", "py_hat", "pz_hat",
    "e1", "e2", "e3", "e4",
    "ey1", "ey2", "ey3", "ey4",
    "xi1", "xi2", "xi3", "xi4",
    "E_R", "E_P1", "E_P2", "E_P3",
    "bw_hat_x", "bw_hat_y", "bw_hat_z",
    "bv_hat_x", "bv_hat_y", "bv_hat_z",
    "lyapunov",
    "env_ok1", "env_ok2", "env_ok3", "env_ok4",
    "clamped1", "clamped2", "clamped3", "clamped4",
    "aborted",
];

/// 1-based column index, as used by plotting tools.
pub fn column(name: &str) -> Option<usize> {
    CSV_COLUMNS.iter().position(|c| *c == name).map(|i| i + 1)
}

pub fn csv_header() -> String {
    CSV_COLUMNS.join(",")
}

fn push_f(line: &mut String, x: f64) {
    // 17 significant digits: enough to reproduce the f64 exactly
    let _ = write!(line, ",{x:.16e}");
}

fn push_b(line: &mut String, b: bool) {
    line.push_str(if b { ",1" } else { ",0" });
}

fn row_line(row: &RunRow, aborted: bool) -> String {
    let mut line = String::with_capacity(45 * 24);
    let _ = write!(line, "{:.16e}", row.t);
    for v in [&row.euler_true, &row.euler_hat, &row.p_true, &row.p_hat] {
        v.iter().for_each(|x| push_f(&mut line, *x));
    }
    for arr in [&row.e, &row.e_y, &row.xi, &row.transformed] {
        arr.iter().for_each(|x| push_f(&mut line, *x));
    }
    row.b_hat.iter().for_each(|x| push_f(&mut line, *x));
    push_f(&mut line, row.lyapunov);
    row.envelope_ok.iter().for_each(|b| push_b(&mut line, *b));
    row.clamped.iter().for_each(|b| push_b(&mut line, *b));
    push_b(&mut line, aborted);
    line
}

/// Writes the header and one line per row. The last row is flagged if the run aborted right after it.
pub fn write_csv<W: Write>(rec: &RunRecord, mut out: W) -> io::Result<()> {
    writeln!(out, "{}", csv_header())?;
    let last = rec.rows.len().saturating_sub(1);
    for (k, row) in rec.rows.iter().enumerate() {
        writeln!(out, "{}", row_line(row, rec.abort.is_some() && k == last))?;
    }
    out.flush()
}

fn fmt4(a: &[f64; 4]) -> String {
    a.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(", ")
}

fn fmt4u(a: &[usize; 4]) -> String {
    a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Human-readable run summary.
pub fn summary(s: &Scenario, rec: &RunRecord, wall: Duration) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ppf-pose run summary");
    let _ = writeln!(out, "csv schema version:        {CSV_SCHEMA_VERSION}");
    let _ = writeln!(out, "seed:                      {}", s.seed);
    let _ = writeln!(out, "dt [s]:                    {}", s.dt);
    let _ = writeln!(out, "duration [s]:              {}", s.duration);
    let _ = writeln!(
        out,
        "mode:                      {}",
        match s.filter.mode {
            crate::ppf::ClampMode::Strict => "strict".to_string(),
            crate::ppf::ClampMode::Clamp { margin } => format!("clamp (margin {margin} of delta_bar)"),
        }
    );
    let _ = writeln!(out, "rows:                      {}", rec.rows.len());
    match &rec.abort {
        None => {
            let _ = writeln!(out, "status:                    completed");
        }
        Some(a) => {
            let _ = writeln!(out, "status:                    aborted at row {}: {}", a.row, a.error);
        }
    }
    if let Some(f) = rec.final_row() {
        let _ = writeln!(out, "final t [s]:               {}", f.t);
        let _ = writeln!(out, "final e (true):            [{}]", fmt4(&f.e));
        let _ = writeln!(out, "final e (measured):        [{}]", fmt4(&f.e_y));
        let _ = writeln!(out, "final xi:                  [{}]", fmt4(&f.xi));
        let _ = writeln!(out, "final |P~| (true):         {:.6e}", (f.e[1].powi(2) + f.e[2].powi(2) + f.e[3].powi(2)).sqrt());
        let _ = writeln!(out, "final b_hat:               [{}]", f.b_hat.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(", "));
        let _ = writeln!(out, "mean e over final 5 s:     [{}]", fmt4(&rec.tail_mean_error(5.0)));
    }
    let _ = writeln!(out, "max |e|/xi:                [{}]", fmt4(&rec.max_envelope_usage()));
    let _ = writeln!(out, "envelope failures (rows):  [{}]", fmt4u(&rec.envelope_failures()));
    let _ = writeln!(out, "band exits before clamp:   [{}]", fmt4u(&rec.band_exits));
    let _ = writeln!(out, "clamp events:              [{}]", fmt4u(&rec.clamp_events));
    let post: usize = rec.post_clamp_violations.iter().sum();
    let _ = writeln!(out, "envelope violations:       {post}");
    let _ = writeln!(out, "unstable-set perturbations: {}", rec.perturbations);
    if rec.rows.len() > 1 {
        let _ = writeln!(out, "max lyapunov increase:     {:.6e}", rec.max_lyapunov_increase());
    }
    let _ = writeln!(out, "wall time [s]:             {:.3}", wall.as_secs_f64());
    out
}

/// gnuplot script for the three standard figures, reading `csv_name`.
pub fn plot_script(csv_name: &str) -> String {
    let c = |n: &str| column(n).expect("known column");
    let mut g = String::new();
    let _ = writeln!(g, "# gnuplot script generated by ppf-pose (csv schema v{CSV_SCHEMA_VERSION})");
    let _ = writeln!(g, "set datafile separator ','");
    let _ = writeln!(g, "set key autotitle columnhead");
    let _ = writeln!(g, "set terminal pngcairo size 900,900");
    let _ = writeln!(g, "data = '{csv_name}'");
    let _ = writeln!(g, "set xlabel 't [s]'");
    let _ = writeln!(g, "set grid");
    let _ = writeln!(g);

    let _ = writeln!(g, "set output 'euler.png'");
    let _ = writeln!(g, "set multiplot layout 3,1 title 'Euler angles: true vs estimate'");
    for (name, label) in [("roll", "roll [rad]"), ("pitch", "pitch [rad]"), ("yaw", "yaw [rad]")] {
        let _ = writeln!(g, "set ylabel '{label}'");
        let _ = writeln!(
            g,
            "plot data using {}:{} with lines lw 2 title 'true', '' using {}:{} with lines dt 2 lw 2 title 'estimate'",
            c("t"),
            c(name),
            c("t"),
            c(&format!("{name}_hat"))
        );
    }
    let _ = writeln!(g, "unset multiplot");
    let _ = writeln!(g);

    let _ = writeln!(g, "set output 'position.png'");
    let _ = writeln!(g, "set multiplot layout 3,1 title 'Position: true vs estimate'");
    for (name, label) in [("px", "x [m]"), ("py", "y [m]"), ("pz", "z [m]")] {
        let _ = writeln!(g, "set ylabel '{label}'");
        let _ = writeln!(
            g,
            "plot data using {}:{} with lines lw 2 title 'true', '' using {}:{} with lines dt 2 lw 2 title 'estimate'",
            c("t"),
            c(name),
            c("t"),
            c(&format!("{name}_hat"))
        );
    }
    let _ = writeln!(g, "unset multiplot");
    let _ = writeln!(g);

    let _ = writeln!(g, "set output 'errors.png'");
    let _ = writeln!(g, "set multiplot layout 2,2 title 'Errors inside their envelopes'");
    for (i, label) in ["||R~||_I", "P~_x [m]", "P~_y [m]", "P~_z [m]"].iter().enumerate() {
        let e = c(&format!("e{}", i + 1));
        let xi = c(&format!("xi{}", i + 1));
        let _ = writeln!(g, "set ylabel '{label}'");
        let _ = writeln!(
            g,
            "plot data using {t}:{e} with lines lw 2 title 'e{n}', '' using {t}:{xi} with lines lc rgb 'red' title 'xi{n}', '' using {t}:(-${xi}) with lines lc rgb 'red' notitle",
            t = c("t"),
            n = i + 1
        );
    }
    let _ = writeln!(g, "unset multiplot");
    g
}

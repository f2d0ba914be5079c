//! `trajectory.csv`, `run_meta` and `plot.gp`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::{Experiment, RunConfig};
use crate::error::CliError;
use crate::run::RunOutput;

/// Version of the CSV column layout, bumped whenever a column is renamed,
/// removed or reordered.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const CSV_FILE: &str = "trajectory.csv";
pub const META_FILE: &str = "run_meta";
pub const PLOT_FILE: &str = "plot.gp";

/// Named columns of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(first: &str, values: Vec<f64>) -> Self {
        Table {
            names: vec![first.to_string()],
            columns: vec![values],
        }
    }

    pub fn push(&mut self, name: &str, values: Vec<f64>) {
        assert_eq!(
            values.len(),
            self.rows(),
            "column {name} has the wrong length"
        );
        self.names.push(name.to_string());
        self.columns.push(values);
    }

    /// Insert after `anchor`, or append when it is absent.
    pub fn insert_after(&mut self, anchor: &str, name: &str, values: Vec<f64>) {
        assert_eq!(
            values.len(),
            self.rows(),
            "column {name} has the wrong length"
        );
        let at = self.index(anchor).map_or(self.names.len(), |i| i + 1);
        self.names.insert(at, name.to_string());
        self.columns.insert(at, values);
    }

    pub fn rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.index(name).map(|i| self.columns[i].as_slice())
    }

    /// # Panics
    /// If the column does not exist.
    pub fn value(&self, name: &str, row: usize) -> f64 {
        self.column(name)
            .unwrap_or_else(|| panic!("no column {name}"))[row]
    }

    /// Header plus one line per row, 17 significant digits, LF endings.
    pub fn to_csv(&self) -> String {
        let mut s = self.names.join(",");
        s.push('\n');
        for r in 0..self.rows() {
            for (i, col) in self.columns.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                write!(s, "{:.16e}", col[r]).expect("writing to a String");
            }
            s.push('\n');
        }
        s
    }
}

pub fn meta_text(config: &RunConfig, out: &RunOutput) -> String {
    let mut s = String::new();
    let mut line = |k: &str, v: &str| {
        s.push_str(k);
        s.push('=');
        s.push_str(v);
        s.push('\n');
    };
    line("qme_version", env!("CARGO_PKG_VERSION"));
    line("csv_schema_version", &CSV_SCHEMA_VERSION.to_string());
    line("csv_columns", &out.table.names().join(","));
    line("csv_rows", &out.table.rows().to_string());
    line(
        "units",
        "hbar=1 k_B=1 mass=1; kt0 and kte in units of hbar*omega",
    );
    for (k, v) in config.resolved() {
        line(k, &v);
    }
    let solver = &config.solver;
    line("renorm_tol", &format!("{:?}", solver.renorm_tol));
    line("orth_tol", &format!("{:?}", solver.orth_tol));
    line("gap_floor", &format!("{:?}", solver.gap_floor));
    line(
        "positivity_tol",
        &solver
            .positivity_tol
            .map_or_else(|| "none".to_string(), |v| format!("{v:?}")),
    );
    for (k, v) in &out.extra_meta {
        line(k, v);
    }
    s
}

/// Gnuplot script for the figure matching the experiment.
pub fn plot_script(config: &RunConfig, out: &RunOutput) -> String {
    let col = |name: &str| {
        out.table
            .names()
            .iter()
            .position(|n| n == name)
            .map_or(0, |i| i + 1)
    };
    let mut s = String::new();
    s.push_str("# gnuplot script; run `gnuplot -p plot.gp` in this directory\n");
    s.push_str("set datafile separator ','\nset key autotitle columnhead\nset grid\n");
    let body = match config.experiment {
        Experiment::MuTable => format!(
            "set xlabel 'm'\nset ylabel 'mu(m)'\nplot '{CSV_FILE}' using 1:{} with lines lw 2 notitle\n",
            col("mu")
        ),
        Experiment::OscillatorQuench => format!(
            "set multiplot layout 2,1 title 'oscillator quench ({eq})'\n\
             set xlabel 't'\nset ylabel '<P^2>'\n\
             plot '{CSV_FILE}' using 1:{p2} with lines lw 2\n\
             set ylabel 'ground state'\nset yrange [0:1]\n\
             plot '{CSV_FILE}' using 1:{pop} with lines lw 2, \\\n\
             \x20    '' using 1:{p0} with lines dt 2, \\\n\
             \x20    '' using 1:{ov} with lines dt 3\n\
             unset multiplot\n",
            eq = config.equation,
            p2 = col("P2"),
            pop = col("pop_0"),
            p0 = col("p_0"),
            ov = col("overlap_0"),
        ),
        Experiment::TwoLevelRelax => format!(
            "set xlabel 't'\nset ylabel 'Bloch vector'\nset yrange [-1:1]\n\
             plot '{CSV_FILE}' using 1:{x} with lines, '' using 1:{y} with lines, \\\n\
             \x20    '' using 1:{z} with lines, '' using 1:{n} with lines lw 2\n",
            x = col("m_x"),
            y = col("m_y"),
            z = col("m_z"),
            n = col("m_norm"),
        ),
        Experiment::BlochJacobian => format!(
            "set xlabel 'Re lambda'\nset ylabel 'Im lambda'\n\
             plot '{CSV_FILE}' using {re}:{im} with points pt 7 ps 2 title 'eigenvalues'\n",
            re = col("eig_re"),
            im = col("eig_im"),
        ),
    };
    s.push_str(&body);
    s
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_all(config: &RunConfig, out: &RunOutput) -> Result<(), CliError> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    write(&dir.join(CSV_FILE), &out.table.to_csv())?;
    write(&dir.join(META_FILE), &meta_text(config, out))?;
    write(&dir.join(PLOT_FILE), &plot_script(config, out))
}

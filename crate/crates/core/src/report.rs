//! Report output: deterministic JSON, CSV tables and reproduction metadata.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::config::Config;
use crate::dynamics::{CRIT_B_READING, NABLA_Y_CONVENTION};
use crate::error::{MaglabError, Result};
use crate::orbit::{SolverOptions, Spectrum};

/// Pretty JSON with every float written as `{:.16e}` (17 significant digits).
struct FixedFloats<'a>(PrettyFormatter<'a>);

impl Formatter for FixedFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

/// Serializes `value` as pretty JSON with fixed float formatting. Non-finite
/// floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats(PrettyFormatter::with_indent(b"  ")));
    value.serialize(&mut ser).map_err(|source| MaglabError::Json {
        path: "<report>".into(),
        source,
    })?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Float formatting shared by JSON and CSV.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

/// A rectangular table of preformatted cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io_err = |e: csv::Error| MaglabError::Io {
            path: format!("<table {}>", self.name),
            source: io::Error::other(e),
        };
        w.write_record(&self.columns).map_err(io_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(io_err)?;
        }
        let bytes = w.into_inner().map_err(|e| MaglabError::Io {
            path: format!("<table {}>", self.name),
            source: e.into_error(),
        })?;
        Ok(String::from_utf8(bytes).expect("csv writes UTF-8"))
    }
}

/// Anything that renders to one or more CSV tables.
pub trait Tabular {
    fn tables(&self) -> Vec<Table>;
}

/// Several tables in one stream, each preceded by a `# name` line.
pub fn tables_to_csv(tables: &[Table]) -> Result<String> {
    if let [t] = tables {
        return t.to_csv();
    }
    let mut out = String::new();
    for (i, t) in tables.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("# {}\n", t.name));
        out.push_str(&t.to_csv()?);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Everything needed to reproduce a report besides the system itself.
#[derive(Clone, Debug, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub system: String,
    pub seed: u64,
    pub solver: SolverOptions,
    pub quadrature: QuadratureMeta,
    pub criteria_grid: [usize; 3],
    /// Radius of the group enumeration ball used by the class dedupe.
    pub enumeration_radius: String,
    pub conventions: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadratureMeta {
    pub panels: usize,
    pub order: usize,
    pub tolerance: f64,
}

pub const ACTION_CONVENTION: &str = "action = ½∫|γ̇|² dt + T/2 − ∫α over the closed orbit of period T (unit speed)";
pub const XRAY_CONVENTION: &str = "I₂[p, q](c) = ∫ p(γ̇, γ̇) + q(γ̇) dt";

impl Metadata {
    pub fn new(cfg: &Config, system: &str) -> Self {
        Self {
            tool: "maglab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            system: system.to_string(),
            seed: cfg.seed,
            solver: cfg.solver_options(),
            quadrature: QuadratureMeta {
                panels: cfg.quadrature.panels,
                order: cfg.quadrature.order,
                tolerance: cfg.quadrature.tolerance,
            },
            criteria_grid: [cfg.criteria.radial, cfg.criteria.angular, cfg.criteria.directions],
            enumeration_radius: "2·R_c + ℓ/2 + 0.5 (R_c octagon circumradius, ℓ class length)".into(),
            conventions: vec![
                ACTION_CONVENTION.into(),
                XRAY_CONVENTION.into(),
                format!("crit_b: {CRIT_B_READING}"),
                format!("∇Y: {NABLA_Y_CONVENTION}"),
            ],
        }
    }
}

/// A result together with its metadata.
#[derive(Clone, Debug, Serialize)]
pub struct Report<T> {
    pub metadata: Metadata,
    pub result: T,
}

impl<T: Serialize + Tabular> Report<T> {
    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => to_json(self),
            Format::Csv => tables_to_csv(&self.result.tables()),
        }
    }
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| MaglabError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| MaglabError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

pub fn opt_cell(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

impl Tabular for Spectrum {
    fn tables(&self) -> Vec<Table> {
        let mut t = Table::new("spectrum", &["word", "action", "length", "period", "el_residual", "crit_dp", "error"]);
        for e in &self.entries {
            t.push(vec![
                e.word.clone(),
                fmt_f64(e.action),
                fmt_f64(e.length),
                fmt_f64(e.period),
                fmt_f64(e.el_residual),
                fmt_f64(e.crit_dp),
                e.error.clone().unwrap_or_default(),
            ]);
        }
        vec![t]
    }
}

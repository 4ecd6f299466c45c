//! report.json, per-diagnostic CSVs and manifest.json.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{numerical_failures, Experiment};
use crate::algebra::Tolerances;
use crate::error::{Error, Result};
use crate::models::{SizeReport, SweepReport, TrendVerdict};

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub library: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub files: Vec<FileEntry>,
}

#[derive(Serialize)]
struct VerdictRow<'a> {
    observable: &'a str,
    quantity: &'a str,
    slope: Option<f64>,
    verdict: TrendVerdict,
}

#[derive(Serialize)]
struct Summary<'a> {
    sizes: usize,
    failed_sizes: usize,
    numerical_failures: Vec<String>,
    trend_verdicts: Vec<VerdictRow<'a>>,
}

#[derive(Serialize)]
struct RunReport<'a> {
    library: &'static str,
    version: &'static str,
    name: Option<&'a str>,
    config_sha256: String,
    seed: Option<u64>,
    tolerances: Tolerances,
    summary: Summary<'a>,
    sweep: &'a SweepReport,
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

const TOL_HEADER: [&str; 4] = ["tol_herm", "tol_orth", "tol_clustering", "tol_null"];

fn tol_cells(t: &Tolerances) -> [String; 4] {
    [t.herm, t.orth, t.clustering, t.null].map(|x| x.to_string())
}

/// Rows of one CSV file; the tolerance columns are appended to every row.
struct Table {
    name: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, header: &[&'static str]) -> Self {
        let mut h = vec!["family", "size"];
        h.extend_from_slice(header);
        h.extend_from_slice(&TOL_HEADER);
        Self {
            name,
            header: h,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, family: &str, s: &SizeReport, cells: Vec<String>) {
        let mut row = vec![family.to_string(), s.size.to_string()];
        row.extend(cells);
        row.extend(tol_cells(&s.tolerances));
        self.rows.push(row);
    }

    fn render(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

fn f(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(f).unwrap_or_default()
}

fn tables(report: &SweepReport) -> Vec<Table> {
    let fam = report.family.as_str();
    let mut sizes = Table::new(
        "sizes.csv",
        &["blocks", "states", "max_multiplicity", "invariance_residual", "error"],
    );
    let mut prop = Table::new("propagator.csv", &["egorov_residual", "unitarity_residual", "box_radius"]);
    let mut var = Table::new(
        "variance.csv",
        &["observable", "e", "n_e", "s2", "qe_defect", "omega_re", "omega_im"],
    );
    let mut ext = Table::new(
        "extraction.csv",
        &[
            "observable",
            "finest_threshold",
            "root_variance",
            "selected",
            "total",
            "final_density",
            "achieved",
            "sup_deviation",
        ],
    );
    let mut it = Table::new("iterated_limit.csv", &["observable", "e", "t", "value_re", "value_im", "target"]);
    let mut spec = Table::new(
        "spectral_measure.csv",
        &["observable", "atoms", "total_mass", "mass_at_zero", "target", "excess"],
    );
    let mut ens = Table::new("ensembles.csv", &["observable", "kind", "E", "N_E", "value_re", "value_im"]);
    let mut sch = Table::new("schwartz.csv", &["observable", "e", "t", "lhs", "rhs"]);
    let mut lev = Table::new("spectrum.csv", &["energy", "m", "m_star", "n", "n_star"]);
    let mut gns = Table::new(
        "gns.csv",
        &[
            "algebra",
            "state",
            "quotient_dim",
            "null_rank",
            "vacuum_rank",
            "g_abelian_certificate",
            "state_reproduction",
            "vacuum_invariance",
            "covariance",
            "unitarity",
            "cyclicity_defect",
        ],
    );
    let mut vac = Table::new("gns_vacuum.csv", &["observable", "lhs", "rhs"]);

    for s in &report.per_size {
        sizes.push(
            fam,
            s,
            vec![
                s.blocks.to_string(),
                s.states.to_string(),
                s.max_multiplicity.to_string(),
                f(s.invariance_residual),
                s.error.clone().unwrap_or_default(),
            ],
        );
        if let Some(p) = &s.propagator {
            prop.push(
                fam,
                s,
                vec![f(p.egorov_residual), f(p.unitarity_residual), p.box_radius.to_string()],
            );
        }
        if let Some(sp) = &s.spectrum {
            for l in &sp.levels {
                lev.push(
                    fam,
                    s,
                    vec![f(l.energy), l.m.to_string(), l.m_star.to_string(), l.n.to_string(), l.n_star.to_string()],
                );
            }
        }
        if let Some(g) = &s.gns {
            let state = serde_json::to_value(&g.state)
                .ok()
                .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_string))
                .unwrap_or_default();
            let r = &g.summary.residuals;
            gns.push(
                fam,
                s,
                vec![
                    serde_json::to_value(g.algebra)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_string))
                        .unwrap_or_default(),
                    state,
                    g.summary.quotient_dim.to_string(),
                    g.summary.null_rank.to_string(),
                    g.summary.vacuum_rank.to_string(),
                    f(g.summary.g_abelian_certificate),
                    f(r.state_reproduction),
                    f(r.vacuum_invariance),
                    f(r.covariance),
                    f(r.unitarity),
                    r.cyclicity_defect.to_string(),
                ],
            );
            for v in &g.vacuum_identity {
                vac.push(fam, s, vec![v.observable.clone(), opt(v.lhs), opt(v.rhs)]);
            }
        }
        for o in &s.observables {
            for r in &o.variance {
                var.push(
                    fam,
                    s,
                    vec![
                        o.name.clone(),
                        f(r.e),
                        r.n_e.to_string(),
                        f(r.s2),
                        f(r.qe_defect),
                        f(o.omega[0]),
                        f(o.omega[1]),
                    ],
                );
            }
            if let Some(x) = &o.extraction {
                ext.push(
                    fam,
                    s,
                    vec![
                        o.name.clone(),
                        opt(x.thresholds.last().copied()),
                        f(x.root_variance),
                        x.selected.to_string(),
                        x.total.to_string(),
                        f(x.final_density),
                        x.achieved.to_string(),
                        f(x.sup_deviation),
                    ],
                );
            }
            if let Some(t) = &o.iterated_limit {
                for (i, &e) in t.e_grid.iter().enumerate() {
                    for (j, &tt) in t.t_grid.iter().enumerate() {
                        let v = t.values[i][j];
                        it.push(fam, s, vec![o.name.clone(), f(e), f(tt), f(v[0]), f(v[1]), f(t.target)]);
                    }
                    let v = t.exact[i];
                    it.push(fam, s, vec![o.name.clone(), f(e), "inf".into(), f(v[0]), f(v[1]), f(t.target)]);
                }
            }
            if let Some(m) = &o.spectral_measure {
                spec.push(
                    fam,
                    s,
                    vec![
                        o.name.clone(),
                        m.atoms.to_string(),
                        f(m.total_mass),
                        f(m.mass_at_zero),
                        f(m.target),
                        f(m.excess),
                    ],
                );
            }
            if let Some(en) = &o.ensembles {
                for r in en.rows.iter().chain(&en.localized) {
                    ens.push(
                        fam,
                        s,
                        vec![
                            o.name.clone(),
                            r.kind.as_str().to_string(),
                            f(r.e),
                            r.n_e.to_string(),
                            f(r.value_re),
                            f(r.value_im),
                        ],
                    );
                }
            }
            if let Some(c) = &o.schwartz {
                for r in &c.rows {
                    sch.push(fam, s, vec![o.name.clone(), f(r.e), f(r.t), f(r.lhs), f(r.rhs)]);
                }
            }
        }
    }
    let mut out = vec![sizes];
    out.extend([prop, var, ext, it, spec, ens, sch, lev, gns, vac].into_iter().filter(|t| !t.rows.is_empty()));
    out
}

fn trend_tables(report: &SweepReport) -> Vec<(&'static str, Vec<u8>)> {
    let tol = tol_cells(&report.tolerances);
    let mut out = Vec::new();
    if !report.trends.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut h = vec!["family", "observable", "quantity", "points", "slope", "intercept", "verdict"];
        h.extend_from_slice(&TOL_HEADER);
        let _ = w.write_record(&h);
        for t in &report.trends {
            let verdict = serde_json::to_value(t.verdict)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            let mut row = vec![
                report.family.clone(),
                t.observable.clone(),
                t.quantity.clone(),
                t.points.to_string(),
                opt(t.slope),
                opt(t.intercept),
                verdict,
            ];
            row.extend(tol.iter().cloned());
            let _ = w.write_record(&row);
        }
        if let Ok(b) = w.into_inner() {
            out.push(("trends.csv", b));
        }
    }
    if !report.windows.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut h = vec!["family", "observable", "quantity", "lo", "hi", "count", "median"];
        h.extend_from_slice(&TOL_HEADER);
        let _ = w.write_record(&h);
        for m in &report.windows {
            let mut row = vec![
                report.family.clone(),
                m.observable.clone(),
                m.quantity.clone(),
                m.lo.to_string(),
                m.hi.to_string(),
                m.count.to_string(),
                opt(m.median),
            ];
            row.extend(tol.iter().cloned());
            let _ = w.write_record(&row);
        }
        if let Ok(b) = w.into_inner() {
            out.push(("windows.csv", b));
        }
    }
    out
}

/// Writes every output file into `dir` (created if needed) and returns the
/// manifest, which is written last.
pub fn write_outputs(exp: &Experiment, report: &SweepReport, config_text: &str, dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let config_sha256 = sha256_hex(config_text.as_bytes());
    let failures = numerical_failures(report);
    let run = RunReport {
        library: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        name: exp.config.name.as_deref(),
        config_sha256: config_sha256.clone(),
        seed: exp.family.seed,
        tolerances: exp.tolerances,
        summary: Summary {
            sizes: report.per_size.len(),
            failed_sizes: report.failures().len(),
            numerical_failures: failures,
            trend_verdicts: report
                .trends
                .iter()
                .map(|t| VerdictRow {
                    observable: &t.observable,
                    quantity: &t.quantity,
                    slope: t.slope,
                    verdict: t.verdict,
                })
                .collect(),
        },
        sweep: report,
    };
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut json = serde_json::to_vec_pretty(&run)?;
    json.push(b'\n');
    files.push(("report.json".into(), json));
    for t in tables(report) {
        files.push((t.name.into(), t.render()?));
    }
    for (name, bytes) in trend_tables(report) {
        files.push((name.into(), bytes));
    }
    let mut entries = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        std::fs::write(dir.join(name), bytes)?;
        entries.push(FileEntry {
            file: name.clone(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
    }
    entries.sort_by(|a, b| a.file.cmp(&b.file));
    let manifest = Manifest {
        library: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256,
        seed: exp.family.seed,
        files: entries,
    };
    let mut m = serde_json::to_vec_pretty(&manifest)?;
    m.push(b'\n');
    std::fs::write(dir.join("manifest.json"), m)?;
    Ok(manifest)
}

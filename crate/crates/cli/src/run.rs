use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lagcal_core::bergman::{assumption_check, density_dispersion, write_diagnostics, BergmanData, STENCIL_SCALES};
use lagcal_core::calibration::{comass_check, fermat_phi, frame_values, max_profile, theta_alignment};
use lagcal_core::canonical::section_space_basis;
use lagcal_core::homotopy::{generate_homotopy, real_locus_loop, verify_volume_comparison, ComparisonReport};
use lagcal_core::metric::{gm_metric, MetricContext};
use lagcal_core::{sample_complex_locus, sample_real_locus, Error, Hypersurface, Result, SamplePool};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;

pub const PHI_BOUND_TOL: f64 = 1e-12;
pub const EQUALITY_TOL: f64 = 1e-10;
pub const THETA_TOL: f64 = 1e-8;
pub const STENCIL_TOL: f64 = 1e-4;
pub const COMASS_TOL: f64 = 1e-9;
pub const RESIDUAL_TOL: f64 = 1e-10;

/// One numerical statement in an artifact. Informational entries carry
/// neither a tolerance nor a verdict.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Claim {
    pub name: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub samples: usize,
    pub pass: Option<bool>,
}

impl Claim {
    fn upper(name: impl Into<String>, value: f64, bound: f64, tolerance: f64, samples: usize) -> Self {
        Claim {
            name: name.into(),
            value,
            tolerance: Some(tolerance),
            samples,
            pass: Some(value <= bound),
        }
    }

    fn info(name: impl Into<String>, value: f64, samples: usize) -> Self {
        Claim {
            name: name.into(),
            value,
            tolerance: None,
            samples,
            pass: None,
        }
    }
}

pub struct Run {
    pub cfg: ExperimentConfig,
    pub seed: u64,
    pub out: PathBuf,
    hs: Hypersurface,
}

#[derive(Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

fn verdict(claims: &[Claim]) -> Verdict {
    if claims.iter().any(|c| c.pass == Some(false)) {
        Verdict::Fail
    } else {
        Verdict::Pass
    }
}

fn print_claims(claims: &[Claim]) {
    for c in claims {
        let tag = match c.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "INFO",
        };
        match c.tolerance {
            Some(t) => println!("{tag} {}: {:e} (tol {t:e}, n = {})", c.name, c.value, c.samples),
            None => println!("{tag} {}: {:e} (n = {})", c.name, c.value, c.samples),
        }
    }
}

/// Riemann-Roch count of sections of O(j) on a degree-d hypersurface in CP^n.
fn hypersurface_sections(n: usize, d: u32, j: i64) -> usize {
    let binom = |a: i64, b: i64| -> i64 {
        if a < b || a < 0 {
            return 0;
        }
        (0..b).fold(1i64, |acc, i| acc * (a - i) / (i + 1))
    };
    let n = n as i64;
    (binom(j + n, n) - binom(j - d as i64 + n, n)) as usize
}

impl Run {
    pub fn new(cfg: ExperimentConfig, seed: Option<u64>, out: PathBuf) -> Result<Self> {
        let hs = cfg.hypersurface()?;
        Ok(Run {
            seed: seed.unwrap_or(cfg.sampling.seed),
            cfg,
            out,
            hs,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn complex_pool(&self) -> Result<SamplePool> {
        sample_complex_locus(&self.hs, self.cfg.sampling.complex, self.seed)
    }

    fn real_pool(&self) -> Result<SamplePool> {
        sample_real_locus(&self.hs, self.cfg.sampling.real, self.seed.wrapping_add(1))
    }

    fn bergman(&self, m: u32, pool: &SamplePool) -> Result<BergmanData> {
        log::info!("building Bergman data for m = {m}");
        BergmanData::build(&self.hs, m, pool)
    }

    fn write_artifact(&self, command: &str, claims: &[Claim], details: Value) -> Result<()> {
        let doc = json!({
            "command": command,
            "seed": self.seed,
            "config": self.cfg,
            "claims": claims,
            "details": details,
        });
        let f = BufWriter::new(File::create(self.path(&format!("{command}.json")))?);
        serde_json::to_writer_pretty(f, &doc)?;
        print_claims(claims);
        Ok(())
    }

    pub fn execute(&self, command: &str) -> Result<Verdict> {
        fs::create_dir_all(&self.out)?;
        let claims = match command {
            "sample" => self.sample()?,
            "basis" => self.basis()?,
            "bergman" => self.bergman_cmd()?,
            "assume-check" => self.assume_check()?,
            "calibrate" => self.calibrate()?,
            "homotopy" => self.homotopy()?,
            "report" => return report(&self.out),
            other => return Err(Error::InvalidParameter(format!("unknown command {other}"))),
        };
        Ok(verdict(&claims))
    }

    fn sample(&self) -> Result<Vec<Claim>> {
        let complex = self.complex_pool()?;
        let real = self.real_pool()?;
        complex.save(&self.hs, &self.path("pool_complex.csv"))?;
        real.save(&self.hs, &self.path("pool_real.csv"))?;
        let resid = |p: &SamplePool| p.points.iter().map(|x| self.hs.residual(x.coords())).fold(0.0, f64::max);
        let reality = real.points.iter().map(|x| x.reality_residual()).fold(0.0, f64::max);
        let claims = vec![
            Claim::upper("complex locus residual", resid(&complex), RESIDUAL_TOL, RESIDUAL_TOL, complex.len()),
            Claim::upper("real locus residual", resid(&real), RESIDUAL_TOL, RESIDUAL_TOL, real.len()),
            Claim::upper("real pool reality residual", reality, RESIDUAL_TOL, RESIDUAL_TOL, real.len()),
            Claim::info("complex total measure", complex.total_measure, complex.len()),
            Claim::info("real total measure", real.total_measure, real.len()),
        ];
        let details = json!({
            "complex": complex.manifest(&self.hs),
            "real": real.manifest(&self.hs),
        });
        self.write_artifact("sample", &claims, details)?;
        Ok(claims)
    }

    fn basis(&self) -> Result<Vec<Claim>> {
        let mut claims = Vec::new();
        let mut manifests = Vec::new();
        for m in self.cfg.powers() {
            let b = section_space_basis(&self.hs, m)?;
            fs::write(self.path(&format!("basis_m{m}.txt")), b.to_text())?;
            let expect = hypersurface_sections(self.hs.ambient_dim(), self.hs.degree(), m as i64 * self.hs.canonical_degree());
            claims.push(Claim::upper(format!("dimension deficit m={m}"), (b.len() as f64 - expect as f64).abs(), 0.0, 0.0, expect));
            manifests.push(b.manifest());
        }
        self.write_artifact("basis", &claims, json!({ "bases": manifests }))?;
        Ok(claims)
    }

    fn bergman_cmd(&self) -> Result<Vec<Claim>> {
        let pool = self.complex_pool()?;
        let probe = &pool.points[..self.cfg.assumption.points.min(pool.len())];
        let mut claims = Vec::new();
        let mut norms = Vec::new();
        for m in self.cfg.powers() {
            let bd = self.bergman(m, &pool)?;
            fs::write(self.path(&format!("bergman_m{m}.txt")), bd.to_text())?;
            write_diagnostics(&self.hs, &bd, probe, BufWriter::new(File::create(self.path(&format!("diagnostics_m{m}.csv")))?))?;
            let n = bd.normalization();
            claims.push(Claim::upper(format!("orthonormalization residual m={m}"), n.gram_residual, RESIDUAL_TOL, RESIDUAL_TOL, n.pool_size));
            claims.push(Claim::info(format!("Gram max standard error m={m}"), n.gram_standard_error_max, n.pool_size));
            let (mean, cv) = density_dispersion(&self.hs, &bd, probe)?;
            claims.push(Claim::info(format!("rho mean m={m}"), mean, probe.len()));
            claims.push(Claim::info(format!("rho coefficient of variation m={m}"), cv, probe.len()));
            norms.push(n.clone());
        }
        self.write_artifact("bergman", &claims, json!({ "normalizations": norms }))?;
        Ok(claims)
    }

    fn assume_check(&self) -> Result<Vec<Claim>> {
        let pool = self.complex_pool()?;
        let probe = &pool.points[..self.cfg.assumption.points.min(pool.len())];
        let mut claims = Vec::new();
        let mut reports = Vec::new();
        let mut metrics: Vec<(String, MetricContext)> = vec![("FS".into(), MetricContext::FubiniStudy)];
        if self.hs.dim() == 1 {
            for m in self.cfg.powers() {
                let bd = Arc::new(self.bergman(m, &pool)?);
                metrics.push((format!("g_{m}"), gm_metric(&self.hs, bd)?));
            }
        }
        for (label, g) in &metrics {
            let rep = assumption_check(&self.hs, g, probe, STENCIL_SCALES)?;
            claims.push(Claim::upper(format!("stencil disagreement {label}"), rep.stencil_disagreement, STENCIL_TOL, STENCIL_TOL, rep.samples));
            claims.push(Claim::info(format!("curvature min eigenvalue {label}"), rep.min_eigenvalue, rep.samples));
            claims.push(Claim::info(format!("curvature max eigenvalue {label}"), rep.max_eigenvalue, rep.samples));
            claims.push(Claim::info(format!("positive fraction {label}"), rep.positive_fraction, rep.samples));
            reports.push(json!({ "metric": label, "report": rep }));
        }
        self.write_artifact("assume-check", &claims, json!({ "reports": reports }))?;
        Ok(claims)
    }

    fn calibrate(&self) -> Result<Vec<Claim>> {
        let complex = self.complex_pool()?;
        let real = self.real_pool()?;
        let mut claims = Vec::new();
        let mut details = Vec::new();
        let mut profile = |label: String, rep: lagcal_core::calibration::CalibrationReport, claims: &mut Vec<Claim>| -> Result<()> {
            rep.write_csv(BufWriter::new(File::create(self.path(&format!("calibrate_{label}.csv")))?))?;
            claims.push(Claim::upper(format!("max |phi| over complex pool, {label}"), rep.complex_max, 1.0 + PHI_BOUND_TOL, PHI_BOUND_TOL, rep.complex_count));
            claims.push(Claim::upper(format!("max ||phi| - 1| over real pool, {label}"), rep.equality_residual, EQUALITY_TOL, EQUALITY_TOL, rep.real_count));
            claims.push(Claim::info(format!("quadratic margin fit R^2, {label}"), rep.quadratic_r2, rep.fit_count));
            details.push(json!({ "label": label, "report": rep }));
            Ok(())
        };
        for m in self.cfg.powers() {
            let bd = self.bergman(m, &complex)?;
            profile(format!("m{m}"), max_profile(&format!("phi_{m}"), &bd, &complex, &real)?, &mut claims)?;
            let t = theta_alignment(&frame_values(&self.hs, bd.phi(), &real.points)?)?;
            claims.push(Claim::upper(format!("phase alignment residual m={m}"), t.residual, THETA_TOL, THETA_TOL, real.len()));
            if self.hs.dim() >= 2 {
                let pts = &complex.points[..self.cfg.calibration.comass_points.min(complex.len())];
                let reps: Vec<_> = pts
                    .par_iter()
                    .enumerate()
                    .map(|(i, p)| comass_check(&self.hs, bd.phi(), p, self.cfg.calibration.comass_frames, self.seed.wrapping_add(i as u64)))
                    .collect::<Result<_>>()?;
                let worst = reps.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
                claims.push(Claim::upper(
                    format!("comass ratio m={m}"),
                    worst,
                    1.0 + COMASS_TOL,
                    COMASS_TOL,
                    pts.len() * self.cfg.calibration.comass_frames,
                ));
            }
        }
        let k = self.hs.canonical_degree();
        if k > 0 && k % 2 == 0 {
            let f = fermat_phi((k / 2) as u32, self.hs.num_vars())?;
            if f.on(&self.hs).is_ok() {
                profile("fermat".into(), max_profile("sum z^2", &f, &complex, &real)?, &mut claims)?;
            }
        }
        self.write_artifact("calibrate", &claims, json!({ "profiles": details }))?;
        Ok(claims)
    }

    fn homotopy(&self) -> Result<Vec<Claim>> {
        let h = &self.cfg.homotopy;
        if self.hs.dim() != 1 {
            return Err(Error::UnsupportedDimension { expected: 1, got: self.hs.dim() });
        }
        let pool = self.complex_pool()?;
        let bd = Arc::new(self.bergman(h.m, &pool)?);
        let g = gm_metric(&self.hs, bd.clone())?;
        let lp = real_locus_loop(&self.hs, h.vertices)?;
        let reports: Vec<(ComparisonReport, lagcal_core::homotopy::Homotopy)> = (0..h.count)
            .into_par_iter()
            .map(|i| {
                let amplitude = h.max_amplitude * (i + 1) as f64 / h.count as f64;
                let seed = self.seed.wrapping_add(i as u64);
                let hom = generate_homotopy(&self.hs, &lp, &bd, h.steps, amplitude, seed, h.guard_floor)?;
                Ok((verify_volume_comparison(&self.hs, &hom, &bd, &g)?, hom))
            })
            .collect::<Result<_>>()?;
        let mut claims = Vec::new();
        for (i, (rep, hom)) in reports.iter().enumerate() {
            hom.write_trace(BufWriter::new(File::create(self.path(&format!("homotopy_{i:02}.csv")))?))?;
            let short = rep.records.iter().map(|r| rep.base_length - r.length).fold(f64::NEG_INFINITY, f64::max);
            let deficit = rep.records.iter().map(|r| r.xi_abs - r.length).fold(f64::NEG_INFINITY, f64::max);
            let samples = rep.vertices * (rep.steps + 1);
            claims.push(Claim::upper(format!("shortening below length(L), seed {}", rep.seed), short, rep.tolerance, rep.tolerance, samples));
            claims.push(Claim::upper(format!("|xi| - length, seed {}", rep.seed), deficit, rep.tolerance, rep.tolerance, samples));
            claims.push(Claim::upper(format!("xi conservation, seed {}", rep.seed), rep.max_conservation, rep.tolerance, rep.tolerance, samples));
        }
        let passed = reports.iter().filter(|(r, _)| r.pass).count();
        println!("{passed}/{} comparisons satisfied", reports.len());
        let reps: Vec<&ComparisonReport> = reports.iter().map(|(r, _)| r).collect();
        self.write_artifact("homotopy", &claims, json!({ "passed": passed, "total": reps.len(), "reports": reps }))?;
        Ok(claims)
    }
}

/// Collects the claims of every artifact in `dir` into `summary.json` and
/// `summary.csv`.
pub fn report(dir: &Path) -> Result<Verdict> {
    if !dir.is_dir() {
        return Err(Error::InvalidParameter(format!("no artifacts in {}", dir.display())));
    }
    let mut names: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_stem().is_some_and(|s| s != "summary"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::InvalidParameter(format!("no artifacts in {}", dir.display())));
    }
    let mut rows = Vec::new();
    let mut artifacts = Vec::new();
    for p in &names {
        let doc: Value = serde_json::from_reader(File::open(p)?)?;
        let command = doc["command"].as_str().unwrap_or_default().to_string();
        let claims: Vec<Claim> = serde_json::from_value(doc["claims"].clone())?;
        artifacts.push(json!({ "command": command, "seed": doc["seed"], "verdict": format!("{:?}", verdict(&claims)) }));
        rows.extend(claims.into_iter().map(|c| (command.clone(), c)));
    }
    let all: Vec<Claim> = rows.iter().map(|(_, c)| c.clone()).collect();
    let failed = all.iter().filter(|c| c.pass == Some(false)).count();
    let checked = all.iter().filter(|c| c.pass.is_some()).count();
    let summary = json!({
        "artifacts": artifacts,
        "checked": checked,
        "failed": failed,
        "claims": rows.iter().map(|(cmd, c)| json!({ "command": cmd, "claim": c })).collect::<Vec<_>>(),
    });
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("summary.json"))?), &summary)?;
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record(["command", "name", "value", "tolerance", "samples", "pass"])?;
    for (cmd, c) in &rows {
        let tol = c.tolerance.map(|t| format!("{t:e}")).unwrap_or_default();
        let pass = c.pass.map(|p| p.to_string()).unwrap_or_default();
        w.write_record([cmd.as_str(), &c.name, &format!("{:e}", c.value), &tol, &c.samples.to_string(), &pass])?;
    }
    w.flush()?;
    println!("{} claims checked across {} artifacts, {failed} failed", checked, names.len());
    Ok(if failed == 0 { Verdict::Pass } else { Verdict::Fail })
}

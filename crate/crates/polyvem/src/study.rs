//! Study configuration, the mesh/validate/convergence drivers, and their
//! machine-readable CSV outputs. The thin command-line binary delegates here;
//! the same entry points serve library users and the test suites.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{check_a2, check_a2_prime, poincare_probe, BoundaryTriangulation};
use crate::error::{Error, Result};
use crate::geometry::inscribed_ball_radius;
use crate::mesh::{
    build_fitted, build_unfitted, cartesian_background, BoundingBox, LevelSet, Mesh, MeshKind,
};
use crate::operators::{assemble, full_vertex_values};
use crate::solver::{compute_errors, convergence_rates, solve, ErrorRecord, ExactSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Vem,
    Ivem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelSetKind {
    Squircle,
    Sphere,
    Plane,
}

/// Acceptance windows for the last-pair convergence rates.
pub const ENERGY_RATE_WINDOW: (f64, f64) = (0.8, 1.3);
pub const L2_RATE_WINDOW: (f64, f64) = (1.7, 2.4);

/// Experiment description shared by the drivers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub method: Method,
    pub kind: MeshKind,
    pub levelset: LevelSetKind,
    pub n_list: Vec<usize>,
    /// interface offset: the benchmark radius is `0.75 − eps`
    pub eps: f64,
    pub beta_minus: f64,
    pub beta_plus: f64,
    pub alpha: f64,
    pub tol: f64,
    pub seed: u64,
    /// epsilon for the path-condition check
    pub a2_eps: f64,
    /// minimum-angle parameter (degrees) for the local check
    pub a2prime_theta_m_deg: f64,
    pub a2prime_rho: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            method: Method::Vem,
            kind: MeshKind::Fitted,
            levelset: LevelSetKind::Squircle,
            n_list: vec![8, 16, 32],
            eps: 1e-1,
            beta_minus: 1.0,
            beta_plus: 10.0,
            alpha: 0.5,
            tol: 1e-10,
            seed: 0,
            a2_eps: 1.0,
            a2prime_theta_m_deg: 30.0,
            a2prime_rho: 0.5,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let kind_ok = match self.method {
            Method::Vem => self.kind == MeshKind::Fitted,
            Method::Ivem => self.kind == MeshKind::Unfitted,
        };
        if !kind_ok {
            return Err(Error::InvalidConfig(
                "method vem requires kind fitted; method ivem requires kind unfitted".into(),
            ));
        }
        if self.n_list.is_empty() {
            return Err(Error::InvalidConfig("n_list must not be empty".into()));
        }
        for &n in &self.n_list {
            if n == 0 || n & (n - 1) != 0 {
                return Err(Error::InvalidConfig(format!("N = {n} is not a power of two")));
            }
        }
        if !self.n_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig("n_list must be strictly increasing".into()));
        }
        if self.beta_minus <= 0.0 || self.beta_plus <= 0.0 || self.tol <= 0.0 {
            return Err(Error::InvalidConfig("beta and tol must be positive".into()));
        }
        Ok(())
    }

    pub fn level_set(&self) -> LevelSet {
        match self.levelset {
            LevelSetKind::Squircle => LevelSet::squircle(self.eps),
            LevelSetKind::Sphere => LevelSet::sphere(0.75 - self.eps),
            LevelSetKind::Plane => LevelSet::plane_z(0.75 - self.eps),
        }
    }

    pub fn exact_solution(&self) -> ExactSolution {
        match self.levelset {
            LevelSetKind::Squircle => {
                ExactSolution::squircle(self.alpha, self.beta_minus, self.beta_plus, self.eps)
            }
            LevelSetKind::Sphere => {
                ExactSolution::sphere(self.alpha, self.beta_minus, self.beta_plus, 0.75 - self.eps)
            }
            LevelSetKind::Plane => ExactSolution::planar_interface(
                0.75 - self.eps,
                self.beta_minus,
                self.beta_plus,
                1.0,
                -2.0,
                3.0,
                1.0,
            ),
        }
    }

    pub fn build_mesh(&self, n: usize) -> Result<Mesh> {
        let domain = BoundingBox::symmetric_unit();
        let background = cartesian_background(n, &domain);
        let ls = self.level_set();
        match self.kind {
            MeshKind::Fitted => build_fitted(&background, &ls),
            MeshKind::Unfitted => build_unfitted(&background, &ls),
        }
    }

    fn metadata_line(&self) -> String {
        format!(
            "# method={:?} kind={:?} levelset={:?} eps={} beta_minus={} beta_plus={} alpha={} tol={} seed={}",
            self.method, self.kind, self.levelset, self.eps, self.beta_minus, self.beta_plus,
            self.alpha, self.tol, self.seed
        )
        .to_lowercase()
    }
}

// ---------------------------------------------------------------------------
// convergence
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LevelRow {
    pub record: ErrorRecord,
    pub cg_iters: usize,
    pub wall_ms: u128,
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub rows: Vec<LevelRow>,
    pub energy_rates: Vec<f64>,
    pub l2_rates: Vec<f64>,
}

impl StudyResult {
    /// Last-pair rates inside the acceptance windows.
    pub fn rates_in_windows(&self) -> bool {
        let (Some(&e), Some(&l)) = (self.energy_rates.last(), self.l2_rates.last()) else {
            return false;
        };
        e >= ENERGY_RATE_WINDOW.0
            && e <= ENERGY_RATE_WINDOW.1
            && l >= L2_RATE_WINDOW.0
            && l <= L2_RATE_WINDOW.1
    }
}

/// Runs the level sweep: build, assemble, solve, and measure errors per
/// level; computes per-pair rates.
pub fn run_convergence(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let exact = config.exact_solution();
    let beta = (config.beta_minus, config.beta_plus);
    let mut rows = Vec::new();
    for &n in &config.n_list {
        let t0 = Instant::now();
        let mesh = config.build_mesh(n)?;
        let asm = assemble(&mesh, beta, &|p| exact.source(p), &|p| exact.value(p))?;
        let (x, report) = solve(&asm.system, config.tol, 20_000)?;
        let full = full_vertex_values(&asm.system, &x);
        let record = compute_errors(&mesh, &full, &exact, &asm.locals, n)?;
        rows.push(LevelRow {
            record,
            cg_iters: report.iterations,
            wall_ms: t0.elapsed().as_millis(),
        });
    }
    let ns: Vec<usize> = rows.iter().map(|r| r.record.n).collect();
    let energy: Vec<f64> = rows.iter().map(|r| r.record.energy_err).collect();
    let l2: Vec<f64> = rows.iter().map(|r| r.record.l2_err).collect();
    let (energy_rates, l2_rates) = if rows.len() >= 2 {
        (convergence_rates(&energy, &ns)?, convergence_rates(&l2, &ns)?)
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(StudyResult {
        rows,
        energy_rates,
        l2_rates,
    })
}

/// CSV for a convergence run: '#'-prefixed metadata, per-level data rows,
/// and trailing rate rows.
pub fn convergence_csv(config: &StudyConfig, result: &StudyResult) -> String {
    let mut out = String::new();
    out.push_str("# polyvem convergence v1\n");
    out.push_str(&config.metadata_line());
    out.push('\n');
    out.push_str(
        "# energy_err: broken beta_h-weighted H1 seminorm of u - Pi u_h (branchwise extension per discrete side); l2_err: L2 norm of u - Pi u_h (true-side values)\n",
    );
    out.push_str("N,h,dofs,energy_err,l2_err,cg_iters,wall_ms\n");
    for row in &result.rows {
        let r = &row.record;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n,
            r.h,
            r.dofs,
            finite(r.energy_err),
            finite(r.l2_err),
            row.cg_iters,
            row.wall_ms
        )
        .unwrap();
    }
    out.push_str("# rates\n");
    out.push_str("pair,energy_rate,l2_rate\n");
    for k in 0..result.energy_rates.len() {
        writeln!(
            out,
            "{}:{},{},{}",
            result.rows[k].record.n,
            result.rows[k + 1].record.n,
            finite(result.energy_rates[k]),
            finite(result.l2_rates[k])
        )
        .unwrap();
    }
    out
}

/// Human-readable diff of the rate assertion, for the failing exit path.
pub fn rate_assertion_report(result: &StudyResult) -> String {
    let e = result.energy_rates.last().copied().unwrap_or(f64::NAN);
    let l = result.l2_rates.last().copied().unwrap_or(f64::NAN);
    format!(
        "last-pair rates: energy {} (window [{}, {}]), l2 {} (window [{}, {}])",
        e, ENERGY_RATE_WINDOW.0, ENERGY_RATE_WINDOW.1, l, L2_RATE_WINDOW.0, L2_RATE_WINDOW.1
    )
}

fn finite(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        // NaN/Inf never serialize; an impossible value marks defective rows
        "-1".into()
    }
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ElementReport {
    pub element_id: usize,
    pub theta_max_deg: f64,
    pub n_triangles: usize,
    pub a2_pass: bool,
    pub a2prime_eps: Option<f64>,
    pub poincare_ratio: f64,
    pub poincare_bound: f64,
    pub inscribed_radius: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ValidationSummary {
    pub n_elements: usize,
    pub max_theta_deg: f64,
    pub a2_failures: usize,
    pub poincare_violations: usize,
    pub worst_ratio_over_bound: f64,
}

/// Per-element mesh-quality sweep at the first level of the config.
pub fn run_validate(config: &StudyConfig) -> Result<(Vec<ElementReport>, ValidationSummary)> {
    config.validate()?;
    let n = config.n_list[0];
    let mesh = config.build_mesh(n)?;
    let theta_m = config.a2prime_theta_m_deg.to_radians();
    let reports: Vec<Result<ElementReport>> = mesh
        .elements
        .par_iter()
        .enumerate()
        .map(|(ei, elem)| {
            let tri = BoundaryTriangulation::of_polyhedron(&elem.poly)?;
            let probe = poincare_probe(&elem.poly, &tri, config.a2_eps)?;
            Ok(ElementReport {
                element_id: ei,
                theta_max_deg: tri.theta_max().to_degrees(),
                n_triangles: tri.n_triangles(),
                a2_pass: check_a2(&tri, config.a2_eps).is_some(),
                a2prime_eps: check_a2_prime(&tri, theta_m, config.a2prime_rho),
                poincare_ratio: probe.ratio,
                poincare_bound: probe.bound,
                inscribed_radius: inscribed_ball_radius(&elem.poly).ok(),
            })
        })
        .collect();
    let reports: Vec<ElementReport> = reports.into_iter().collect::<Result<_>>()?;

    let mut summary = ValidationSummary {
        n_elements: reports.len(),
        max_theta_deg: 0.0,
        a2_failures: 0,
        poincare_violations: 0,
        worst_ratio_over_bound: 0.0,
    };
    for r in &reports {
        summary.max_theta_deg = summary.max_theta_deg.max(r.theta_max_deg);
        if !r.a2_pass {
            summary.a2_failures += 1;
        }
        if r.poincare_ratio > r.poincare_bound {
            summary.poincare_violations += 1;
        }
        summary.worst_ratio_over_bound = summary
            .worst_ratio_over_bound
            .max(r.poincare_ratio / r.poincare_bound);
    }
    Ok((reports, summary))
}

pub fn validate_csv(
    config: &StudyConfig,
    reports: &[ElementReport],
    summary: &ValidationSummary,
) -> String {
    let mut out = String::new();
    out.push_str("# polyvem validate v1\n");
    out.push_str(&config.metadata_line());
    out.push('\n');
    out.push_str(
        "element_id,theta_M_deg,n_T,a2_pass,a2prime_eps,poincare_ratio,poincare_bound,inscribed_radius\n",
    );
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.element_id,
            finite(r.theta_max_deg),
            r.n_triangles,
            r.a2_pass,
            r.a2prime_eps.map(|e| format!("{e}")).unwrap_or_default(),
            finite(r.poincare_ratio),
            finite(r.poincare_bound),
            r.inscribed_radius.map(|e| format!("{e}")).unwrap_or_default(),
        )
        .unwrap();
    }
    writeln!(
        out,
        "# summary elements={} max_theta_M_deg={} a2_failures={} poincare_violations={} worst_ratio_over_bound={}",
        summary.n_elements,
        finite(summary.max_theta_deg),
        summary.a2_failures,
        summary.poincare_violations,
        finite(summary.worst_ratio_over_bound)
    )
    .unwrap();
    out
}

// ---------------------------------------------------------------------------
// mesh
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MeshStats {
    pub n_elements: usize,
    pub n_vertices: usize,
    pub n_interface_elements: usize,
    pub min_element_volume: f64,
    pub volume_sum: f64,
}

/// Builds the configured mesh at the first level and reports its stats;
/// the export text is produced separately with [`crate::mesh::write_mesh`].
pub fn run_mesh(config: &StudyConfig) -> Result<(Mesh, MeshStats)> {
    config.validate()?;
    let mesh = config.build_mesh(config.n_list[0])?;
    let min_element_volume = mesh
        .elements
        .iter()
        .map(|e| e.poly.volume())
        .fold(f64::INFINITY, f64::min);
    let stats = MeshStats {
        n_elements: mesh.n_elements(),
        n_vertices: mesh.n_vertices(),
        n_interface_elements: mesh.interface_elements.len(),
        min_element_volume,
        volume_sum: mesh.volume_sum(),
    };
    Ok((mesh, stats))
}

pub fn mesh_stats_line(stats: &MeshStats) -> String {
    format!(
        "elements={} vertices={} interface_elements={} min_element_volume={} volume_sum={}",
        stats.n_elements,
        stats.n_vertices,
        stats.n_interface_elements,
        finite(stats.min_element_volume),
        finite(stats.volume_sum)
    )
}

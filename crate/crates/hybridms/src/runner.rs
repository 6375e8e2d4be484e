//! Experiment execution: offline basis construction, online solves against a
//! validated cache, equivalence checks, convergence studies and audits, with
//! all artifacts written under one output directory next to a manifest.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use crate::analysis::report::{EquivalenceCase, Report};
use crate::analysis::{self, convergence_study, equivalence_gap};
use crate::cache;
use crate::config::{ConfigError, Experiment, RunConfig};
use crate::field::{write_text, SolutionField};
use crate::local::{build_all, LocalBasisSet};
use crate::mesh::{io::MeshSummary, CellPatch, CoarseMesh, FineMesh, Rect};
use crate::problem::{project_source, CoeffSpec, SourceTerm};
use crate::quad::TriangleRule;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error("no basis cache at {0}; run the `offline` experiment first")]
    CacheMissing(PathBuf),
    #[error(transparent)]
    Cache(#[from] cache::CacheError),
    #[error(transparent)]
    Local(#[from] crate::local::LocalSolveError),
    #[error(transparent)]
    Method(#[from] crate::mhm::MethodError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Result of a run: where the manifest lives and whether every checked
/// property passed (audits, equivalence gaps).
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub ok: bool,
}

#[derive(Serialize)]
struct CacheStamp {
    path: String,
    hash: String,
    hit: bool,
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    mesh: String,
    cells: usize,
    faces: usize,
    k: usize,
    m: usize,
    refinement: u32,
    coefficient: CoeffSpec,
    cache: CacheStamp,
    outputs: Vec<String>,
    timings_ms: BTreeMap<String, f64>,
    ok: bool,
}

struct Ctx {
    cfg: RunConfig,
    mesh: CoarseMesh,
    fine: FineMesh,
    patches: Vec<CellPatch>,
    k: usize,
    m: usize,
    hash: [u8; 32],
    cache_path: PathBuf,
    out_dir: PathBuf,
    outputs: Vec<String>,
    timings: BTreeMap<String, f64>,
}

impl Ctx {
    fn new(
        cfg: RunConfig,
        out_override: Option<PathBuf>,
        cache_override: Option<PathBuf>,
    ) -> Result<Self, RunError> {
        let mesh = cfg.mesh.build()?;
        let fine = FineMesh::build(&mesh, cfg.refinement)?;
        let patches = fine.patches(&mesh);
        let degrees = cfg.degrees();
        let hash = cache::content_hash(&mesh, &cfg.coefficient, degrees.k, degrees.m, cfg.refinement);
        let out_dir = out_override
            .or_else(|| cfg.output.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        let cache_path = cache_override
            .or_else(|| cfg.cache.clone())
            .unwrap_or_else(|| out_dir.join("basis.mhmb"));
        Ok(Ctx {
            k: degrees.k,
            m: degrees.m,
            cfg,
            mesh,
            fine,
            patches,
            hash,
            cache_path,
            out_dir,
            outputs: Vec::new(),
            timings: BTreeMap::new(),
        })
    }

    fn write(&mut self, name: &str, text: &str) -> Result<(), RunError> {
        let path = self.out_dir.join(name);
        write_text(&path, text)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn sources(&self) -> Result<Vec<SourceTerm>, RunError> {
        let mut terms = Vec::new();
        for spec in &self.cfg.sources {
            terms.extend(spec.realize(&self.mesh, self.m)?);
        }
        Ok(terms)
    }

    fn project(&self, source: &SourceTerm) -> Vec<DVector<f64>> {
        project_source(
            source,
            &self.mesh,
            &self.patches,
            self.m,
            &TriangleRule::with_degree(12),
        )
    }

    fn load_bases(&mut self) -> Result<Vec<LocalBasisSet>, RunError> {
        if !self.cache_path.exists() {
            return Err(RunError::CacheMissing(self.cache_path.clone()));
        }
        let t = Instant::now();
        let (_, bases) = cache::read_cache_checked(&self.cache_path, &self.hash)?;
        self.timings
            .insert("cache_read".into(), ms_since(t));
        Ok(bases)
    }

    fn finish(mut self, command: &str, ok: bool) -> Result<RunOutcome, RunError> {
        let manifest = Manifest {
            command: command.into(),
            mesh: self.cfg.mesh.label(),
            cells: self.mesh.cells.len(),
            faces: self.mesh.faces.len(),
            k: self.k,
            m: self.m,
            refinement: self.cfg.refinement,
            coefficient: self.cfg.coefficient.clone(),
            cache: CacheStamp {
                path: self.cache_path.display().to_string(),
                hash: cache::hash_hex(&self.hash),
                hit: !matches!(command, "offline") && self.cache_path.exists(),
            },
            outputs: std::mem::take(&mut self.outputs),
            timings_ms: std::mem::take(&mut self.timings),
            ok,
        };
        write_text(
            &self.out_dir.join("manifest.json"),
            &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
        )?;
        Ok(RunOutcome {
            out_dir: self.out_dir,
            ok,
        })
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Run one experiment. `threads = 0` keeps the default rayon pool; any other
/// value pins the offline stage to that many workers (results are identical
/// either way, cells are merged in index order).
pub fn run(
    experiment: Experiment,
    cfg: RunConfig,
    out_override: Option<PathBuf>,
    cache_override: Option<PathBuf>,
    threads: usize,
) -> Result<RunOutcome, RunError> {
    cfg.validate(experiment)?;
    let mut ctx = Ctx::new(cfg, out_override, cache_override)?;
    match experiment {
        Experiment::Offline => offline(&mut ctx, threads).and_then(|ok| ctx.finish("offline", ok)),
        Experiment::SolveMhm => solve_mhm(&mut ctx).and_then(|ok| ctx.finish("solve-mhm", ok)),
        Experiment::SolveMshho => {
            solve_mshho(&mut ctx).and_then(|ok| ctx.finish("solve-mshho", ok))
        }
        Experiment::SolveFacebased => {
            solve_facebased(&mut ctx).and_then(|ok| ctx.finish("solve-facebased", ok))
        }
        Experiment::Equivalence => {
            equivalence(&mut ctx).and_then(|ok| ctx.finish("equivalence", ok))
        }
        Experiment::Convergence => {
            convergence(&mut ctx).and_then(|ok| ctx.finish("convergence", ok))
        }
        Experiment::Audit => audit(&mut ctx).and_then(|ok| ctx.finish("audit", ok)),
    }
}

fn offline(ctx: &mut Ctx, threads: usize) -> Result<bool, RunError> {
    let t = Instant::now();
    let bases = if threads == 0 {
        build_all(&ctx.mesh, &ctx.fine, &ctx.cfg.coefficient, ctx.k, ctx.m, true)?
    } else if threads == 1 {
        build_all(&ctx.mesh, &ctx.fine, &ctx.cfg.coefficient, ctx.k, ctx.m, false)?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("rayon pool");
        pool.install(|| build_all(&ctx.mesh, &ctx.fine, &ctx.cfg.coefficient, ctx.k, ctx.m, true))?
    };
    ctx.timings.insert("offline_build".into(), ms_since(t));
    let t = Instant::now();
    cache::write_cache(&ctx.cache_path, &ctx.hash, ctx.k, ctx.m, ctx.cfg.refinement, &bases)?;
    ctx.timings.insert("cache_write".into(), ms_since(t));
    let summary = MeshSummary::of(&ctx.mesh);
    ctx.write(
        "mesh_summary.json",
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    let conds: Vec<f64> = bases.iter().map(|b| b.cond_moment).collect();
    let cond_report = serde_json::json!({
        "cond_moment_max": conds.iter().cloned().fold(0.0_f64, f64::max),
        "cond_gram_max": bases.iter().map(|b| b.cond_gram).fold(0.0_f64, f64::max),
        "cells": bases.len(),
    });
    ctx.write("offline_stats.json", &cond_report.to_string())?;
    Ok(true)
}

fn solve_mhm(ctx: &mut Ctx) -> Result<bool, RunError> {
    let bases = ctx.load_bases()?;
    let sources = ctx.sources()?;
    let t = Instant::now();
    let system = crate::mhm::assemble(&ctx.mesh, &bases)?;
    ctx.timings.insert("assemble_factor".into(), ms_since(t));
    let mut first_ms = None;
    let mut extra_ms = 0.0;
    for (i, source) in sources.iter().enumerate() {
        let t = Instant::now();
        let f = ctx.project(source);
        let sol = crate::mhm::solve(&system, &ctx.mesh, &bases, &f)?;
        let field = crate::mhm::reconstruct(&ctx.mesh, &bases, &sol, &f)
            .with_hash(ctx.hash);
        let elapsed = ms_since(t);
        if first_ms.is_none() {
            first_ms = Some(elapsed);
        } else {
            extra_ms += elapsed;
        }
        ctx.write(&format!("mhm_solution_{i:04}.csv"), &field.to_csv(&ctx.patches))?;
        ctx.write(
            &format!("mhm_skeleton_{i:04}.csv"),
            &sol.lambda.to_csv("lambda"),
        )?;
    }
    ctx.timings
        .insert("first_solve".into(), first_ms.unwrap_or(0.0));
    if sources.len() > 1 {
        ctx.timings.insert(
            "avg_extra_solve".into(),
            extra_ms / (sources.len() - 1) as f64,
        );
    }
    Ok(true)
}

fn solve_mshho(ctx: &mut Ctx) -> Result<bool, RunError> {
    let bases = ctx.load_bases()?;
    let sources = ctx.sources()?;
    let t = Instant::now();
    let system = crate::mshho::assemble_condensed(&ctx.mesh, &bases)?;
    ctx.timings.insert("assemble_factor".into(), ms_since(t));
    for (i, source) in sources.iter().enumerate() {
        let f = ctx.project(source);
        let sol = crate::mshho::solve_condensed(&system, &ctx.mesh, &bases, &f)?;
        let field = crate::mshho::reconstruct(&ctx.mesh, &bases, &sol).with_hash(ctx.hash);
        ctx.write(
            &format!("mshho_solution_{i:04}.csv"),
            &field.to_csv(&ctx.patches),
        )?;
        ctx.write(
            &format!("mshho_faces_{i:04}.csv"),
            &sol.u_faces.to_csv("u_f"),
        )?;
    }
    Ok(true)
}

fn solve_facebased(ctx: &mut Ctx) -> Result<bool, RunError> {
    let bases = ctx.load_bases()?;
    let sources = ctx.sources()?;
    let t = Instant::now();
    let system = crate::mshho::assemble_face_based(&ctx.mesh, &bases)?;
    ctx.timings.insert("assemble_factor".into(), ms_since(t));
    for (i, source) in sources.iter().enumerate() {
        let f = ctx.project(source);
        let (faces, field) = crate::mshho::solve_face_based(&system, &ctx.mesh, &bases, &f)?;
        let field = field.with_hash(ctx.hash);
        ctx.write(
            &format!("facebased_solution_{i:04}.csv"),
            &field.to_csv(&ctx.patches),
        )?;
        ctx.write(&format!("facebased_faces_{i:04}.csv"), &faces.to_csv("u_f"))?;
    }
    Ok(true)
}

fn solve_both(
    ctx: &Ctx,
    bases: &[LocalBasisSet],
    mhm_system: &crate::mhm::MhmSystem,
    mshho_system: &crate::mshho::CondensedSystem,
    source: &SourceTerm,
) -> Result<(SolutionField, SolutionField, f64, Vec<DVector<f64>>), RunError> {
    let f = ctx.project(source);
    let sol = crate::mhm::solve(mhm_system, &ctx.mesh, bases, &f)?;
    let u_mhm = crate::mhm::reconstruct(&ctx.mesh, bases, &sol, &f).with_hash(ctx.hash);
    let csol = crate::mshho::solve_condensed(mshho_system, &ctx.mesh, bases, &f)?;
    let u_hho = crate::mshho::reconstruct(&ctx.mesh, bases, &csol).with_hash(ctx.hash);
    Ok((u_mhm, u_hho, sol.residual, f))
}

fn equivalence(ctx: &mut Ctx) -> Result<bool, RunError> {
    let bases = ctx.load_bases()?;
    let sources = ctx.sources()?;
    let mhm_system = crate::mhm::assemble(&ctx.mesh, &bases)?;
    let mshho_system = crate::mshho::assemble_condensed(&ctx.mesh, &bases)?;
    let mut report = Report::default();
    let mut ok = true;
    for source in &sources {
        let t = Instant::now();
        let (u_mhm, u_hho, residual, _f) =
            solve_both(ctx, &bases, &mhm_system, &mshho_system, source)?;
        let gap = equivalence_gap(&ctx.patches, &ctx.cfg.coefficient, &u_mhm, &u_hho)?;
        ok &= gap <= ctx.cfg.tolerances.equivalence_gap;
        report.equivalence.push(EquivalenceCase {
            mesh: ctx.cfg.mesh.label(),
            cells: ctx.mesh.cells.len(),
            k: ctx.k,
            m: ctx.m,
            coefficient: format!("{:?}", ctx.cfg.coefficient),
            source: source.label.clone(),
            gap,
            mhm_residual: residual,
            cond_moment_max: bases.iter().map(|b| b.cond_moment).fold(0.0, f64::max),
            cond_gram_max: bases.iter().map(|b| b.cond_gram).fold(0.0, f64::max),
        });
        report
            .timings_ms
            .insert(format!("case_{}", source.label), ms_since(t));
    }
    ctx.write("report.json", &report.to_json())?;
    Ok(ok)
}

fn convergence(ctx: &mut Ctx) -> Result<bool, RunError> {
    let spec = ctx.cfg.convergence.clone().unwrap_or_default();
    let sources = ctx.sources()?;
    let source = sources
        .into_iter()
        .next()
        .unwrap_or_else(|| SourceTerm::sin_pi_pi(2.0 * std::f64::consts::PI.powi(2)));
    let mut report = Report::default();
    let mut ok = true;
    for &k in &spec.ks {
        let m = k.saturating_sub(1);
        let t = Instant::now();
        let study = convergence_study(
            k,
            m,
            &ctx.cfg.coefficient,
            &source,
            &spec.divisions,
            ctx.cfg.refinement,
            Rect::UNIT,
        )?;
        report.timings_ms.insert(format!("study_k{k}"), ms_since(t));
        ok &= study.conclusive;
        report.studies.push(study);
    }
    ctx.write("report.json", &report.to_json())?;
    ctx.write("study.csv", &report.studies_csv())?;
    Ok(ok)
}

fn audit(ctx: &mut Ctx) -> Result<bool, RunError> {
    let bases = ctx.load_bases()?;
    let sources = ctx.sources()?;
    let mhm_system = crate::mhm::assemble(&ctx.mesh, &bases)?;
    let mshho_system = crate::mshho::assemble_condensed(&ctx.mesh, &bases)?;
    let tol = ctx.cfg.tolerances.audit();
    let mut report = Report::default();
    let mut ok = true;
    for source in &sources {
        let f = ctx.project(source);
        let sol = crate::mhm::solve(&mhm_system, &ctx.mesh, &bases, &f)?;
        let u_mhm = crate::mhm::reconstruct(&ctx.mesh, &bases, &sol, &f);
        let a = analysis::audit_mhm(
            &ctx.mesh,
            &ctx.fine,
            &ctx.patches,
            &ctx.cfg.coefficient,
            &bases,
            &sol,
            &f,
            &u_mhm,
            &tol,
        );
        ok &= a.pass;
        report.audits.push(a);

        let csol = crate::mshho::solve_condensed(&mshho_system, &ctx.mesh, &bases, &f)?;
        let u_hho = crate::mshho::reconstruct(&ctx.mesh, &bases, &csol);
        let a = analysis::audit_mshho(
            &ctx.mesh,
            &ctx.fine,
            &ctx.patches,
            &ctx.cfg.coefficient,
            &bases,
            &csol,
            &f,
            &u_hho,
            &tol,
        );
        ok &= a.pass;
        report.audits.push(a);
    }
    ctx.write("report.json", &report.to_json())?;
    Ok(ok)
}

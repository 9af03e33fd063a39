use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use bvmt_core::evaluator::{curve_to_csv, evaluate, linreg_r2, prefix_curve_with, EvalOptions, EvaluationReport};
use bvmt_core::minilang::{parse, Program, ScalarKind};
use bvmt_core::mutator::{
    available_counts, enumerate_mutants, mutant_source, resolve_manifest, sample_manifest, FaultManifest, Mutant,
    MutationOperator,
};
use bvmt_core::report::{compare_table, render_report, GroupBy, Metric, Provenance, ReportFormat};
use bvmt_core::subjects::{subject_entry, SubjectEntry};
use bvmt_core::suitegen::{
    emit_prompt, extract_suite, gen_boundary_with, gen_random, llm_fetch_logged, BoundaryOptions, DomainSpec,
    EndpointConfig, ParamRange, PromptTemplate, SuiteLabel, TestSuite,
};
use bvmt_core::tracer::{execute, gcov_style, ExecBudget, Trace};
use serde::Serialize;

use crate::args::{Command, GroupArg, LabelArg, SuiteArgs, Target};
use crate::rundir::RunDir;

pub struct Ctx {
    pub dir: RunDir,
    pub jobs: usize,
    pub hash: String,
}

impl Ctx {
    fn opts(&self, t: &Target) -> Result<EvalOptions> {
        Ok(EvalOptions { budget: ExecBudget::new(t.budget)?, jobs: self.jobs })
    }

    fn provenance(&self) -> Provenance {
        Provenance::current(Some(self.hash.clone()))
    }
}

struct Loaded {
    name: String,
    source: String,
    program: Program,
    domain: Option<DomainSpec>,
    entry: Option<SubjectEntry>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load(t: &Target) -> Result<Loaded> {
    let (name, source, entry) = match (&t.subject, &t.source) {
        (Some(name), _) => {
            let e = subject_entry(name)?;
            (name.clone(), e.source.clone(), Some(e))
        }
        (None, Some(path)) => {
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "program".into());
            (name, read(path)?, None)
        }
        (None, None) => bail!("either --subject or --source is required"),
    };
    let program = parse(&source).map_err(|e| anyhow!("{name}: {e}"))?;
    let mut domain = entry.as_ref().map(|e| e.domain.clone());
    if let Some(path) = &t.domain {
        domain = Some(DomainSpec::from_json(&read(path)?)?);
    }
    if let Some(d) = &mut domain {
        d.check_against(&program)?;
        if d.program.is_empty() {
            d.program = name.clone();
        }
    }
    Ok(Loaded { name, source, program, domain, entry })
}

impl Loaded {
    fn domain(&self) -> Result<&DomainSpec> {
        self.domain.as_ref().ok_or_else(|| anyhow!("`{}` has no input domain; pass --domain", self.name))
    }

    /// The declared domain, or the full range of every parameter's kind.
    fn domain_or_open(&self) -> DomainSpec {
        self.domain.clone().unwrap_or_else(|| DomainSpec {
            program: self.name.clone(),
            params: self
                .program
                .params()
                .iter()
                .map(|p| match p.kind {
                    ScalarKind::Int => ParamRange::int(&p.name, i64::MIN, i64::MAX),
                    ScalarKind::Float => ParamRange::float(&p.name, f64::MIN, f64::MAX),
                })
                .collect(),
            note: None,
        })
    }

    fn kinds(&self) -> Vec<ScalarKind> {
        self.program.params().iter().map(|p| p.kind).collect()
    }

    /// The manifest in effect: `--manifest`, else the subject's bundled one.
    fn manifest(&self, t: &Target) -> Result<Option<FaultManifest>> {
        if let Some(path) = &t.manifest {
            let m: FaultManifest = serde_json::from_str(&read(path)?).context("parsing fault manifest")?;
            if m.resolved.is_empty() {
                return Ok(Some(sample_manifest(&self.program, &m.counts, m.seed)?));
            }
            let mutants = resolve_manifest(&self.program, &m)?;
            return Ok(Some(FaultManifest { mutants, ..m }));
        }
        match &self.entry {
            Some(e) => Ok(Some(e.fault_manifest(&self.program)?)),
            None => Ok(None),
        }
    }

    fn mutants(&self, t: &Target) -> Result<Vec<Mutant>> {
        if t.all_mutants {
            return Ok(enumerate_mutants(&self.program, &MutationOperator::ALL));
        }
        Ok(match self.manifest(t)? {
            Some(m) => m.mutants,
            None => enumerate_mutants(&self.program, &MutationOperator::ALL),
        })
    }

    fn suite(&self, t: &Target, s: &SuiteArgs) -> Result<TestSuite> {
        let seed = || s.seed.ok_or_else(|| anyhow!("seed was not resolved"));
        let mut suite = match s.suite.as_str() {
            "random" => gen_random(self.domain()?, s.n, seed()?)?,
            "boundary" => {
                let mut opts = BoundaryOptions::new(s.n, seed()?, s.eps);
                opts.budget = ExecBudget::new(t.budget)?;
                gen_boundary_with(&self.program, self.domain()?, &opts)?
            }
            path => self.read_suite(Path::new(path))?,
        };
        if suite.program.is_empty() {
            suite.program = self.name.clone();
        }
        Ok(suite)
    }

    /// A suite file, or any text to extract inputs from.
    fn read_suite(&self, path: &Path) -> Result<TestSuite> {
        let text = read(path)?;
        let suite = match TestSuite::from_json(&text, &self.kinds()) {
            Ok(s) => s,
            Err(_) => {
                let mut s = extract_suite(&text, &self.domain_or_open())?;
                s.provenance = format!("{} from {}", s.provenance, path.display());
                s
            }
        };
        for (i, input) in suite.inputs.iter().enumerate() {
            if input.len() != self.program.dim() {
                bail!("{}: input {} has {} values, program expects {}", path.display(), i + 1, input.len(), self.program.dim());
            }
        }
        Ok(suite)
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn suite_file_name(suite: &TestSuite) -> String {
    format!("suites/{}.json", suite.label)
}

pub fn run(cmd: &Command, ctx: &Ctx) -> Result<()> {
    match cmd {
        Command::Check { target } => check(target, ctx),
        Command::Mutants { target, ops, counts, seed, export } => mutants(target, ops, counts.as_deref(), *seed, *export, ctx),
        Command::EmitPrompt { target, template } => {
            let l = load(target)?;
            let text = emit_prompt(*template, &l.source).ok_or_else(|| anyhow!("unknown template {template}"))?;
            let path = ctx.dir.write(&format!("transcripts/prompt-{template}.txt"), &text)?;
            print!("{text}");
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        Command::ImportSuite { target, file, label } => {
            let l = load(target)?;
            let mut suite = l.read_suite(file)?;
            if let Some(label) = label {
                suite.label = match label {
                    LabelArg::Boundary => SuiteLabel::Boundary,
                    LabelArg::General => SuiteLabel::General,
                    LabelArg::Imported => SuiteLabel::Imported,
                    LabelArg::Random => SuiteLabel::Random,
                };
            }
            if suite.program.is_empty() {
                suite.program = l.name.clone();
            }
            let path = ctx.dir.write(&suite_file_name(&suite), &suite.to_json())?;
            println!("imported {} inputs ({} out of domain) -> {}", suite.len(), suite.out_of_domain.len(), path.display());
            Ok(())
        }
        Command::GenRandom { target, n, seed } => {
            let l = load(target)?;
            let seed = seed.ok_or_else(|| anyhow!("seed was not resolved"))?;
            let suite = gen_random(l.domain()?, *n, seed)?;
            let path = ctx.dir.write(&suite_file_name(&suite), &suite.to_json())?;
            println!("generated {} random inputs -> {}", suite.len(), path.display());
            Ok(())
        }
        Command::GenBoundary { target, n, seed, eps } => {
            let l = load(target)?;
            let mut opts = BoundaryOptions::new(*n, seed.ok_or_else(|| anyhow!("seed was not resolved"))?, *eps);
            opts.budget = ExecBudget::new(target.budget)?;
            let suite = gen_boundary_with(&l.program, l.domain()?, &opts)?;
            let path = ctx.dir.write(&suite_file_name(&suite), &suite.to_json())?;
            println!("generated {} boundary inputs -> {}", suite.len(), path.display());
            for w in &suite.warnings {
                println!("warning: {w}");
            }
            Ok(())
        }
        Command::FetchLlm { target, endpoint, template } => fetch_llm(target, endpoint, *template, ctx),
        Command::Eval { target, suite } => eval(target, suite, ctx),
        Command::Curve { target, suite } => curve(target, suite, ctx),
        Command::Regress { runs } => regress(runs, ctx),
        Command::Compare { runs, metric, group_by, format, rows } => compare(runs, metric, *group_by, format, rows, ctx),
        Command::ExportGcovStyle { target, suite } => {
            let l = load(target)?;
            let s = l.suite(target, suite)?;
            ctx.dir.write(&suite_file_name(&s), &s.to_json())?;
            let traces = traces(&l.program, &s, ExecBudget::new(target.budget)?)?;
            let text = gcov_style(&l.program, &traces);
            let path = ctx.dir.write("reports/coverage.gcov", &text)?;
            print!("{text}");
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        Command::Replay { .. } => bail!("replay is handled before dispatch"),
    }
}

fn check(target: &Target, ctx: &Ctx) -> Result<()> {
    let l = load(target)?;
    let p = &l.program;
    let mut out = String::new();
    writeln!(out, "program: {}", l.name)?;
    writeln!(out, "entry: {} ({} parameters)", p.entry_name(), p.dim())?;
    writeln!(out, "functions: {}", p.functions().map(|f| f.name.as_str()).collect::<Vec<_>>().join(", "))?;
    writeln!(out, "statement sites: {}", p.site_table().statement_count())?;
    writeln!(out, "predicate sites: {}", p.site_table().predicate_count())?;
    let avail = available_counts(p);
    let counts: Vec<String> = avail.iter().map(|(op, n)| format!("{op}={n}")).collect();
    writeln!(out, "available mutants: {}", counts.join(" "))?;
    if let Some(d) = &l.domain {
        let ranges: Vec<String> = d.params.iter().map(|r| format!("{} in [{}, {}]", r.name, r.min, r.max)).collect();
        writeln!(out, "domain: {}", ranges.join(", "))?;
    }
    ctx.dir.write("reports/check.txt", &out)?;
    print!("{out}");
    Ok(())
}

fn parse_counts(text: &str) -> Result<BTreeMap<MutationOperator, usize>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|part| {
            let (op, n) = part.split_once('=').ok_or_else(|| anyhow!("expected OP=N, got `{part}`"))?;
            Ok((op.parse::<MutationOperator>()?, n.trim().parse::<usize>().with_context(|| format!("count in `{part}`"))?))
        })
        .collect()
}

fn mutants(target: &Target, ops: &[String], counts: Option<&str>, seed: Option<u64>, export: bool, ctx: &Ctx) -> Result<()> {
    let l = load(target)?;
    let ops: Vec<MutationOperator> = if ops.is_empty() {
        MutationOperator::ALL.to_vec()
    } else {
        ops.iter().map(|s| s.parse()).collect::<Result<_, _>>()?
    };
    let all = enumerate_mutants(&l.program, &ops);
    ctx.dir.write("mutants/all.json", &to_json(&all)?)?;
    let mut per_op: BTreeMap<MutationOperator, usize> = BTreeMap::new();
    for m in &all {
        *per_op.entry(m.operator).or_default() += 1;
    }
    let summary: Vec<String> = per_op.iter().map(|(op, n)| format!("{op}={n}")).collect();
    println!("{} mutants: {}", all.len(), summary.join(" "));

    let manifest = match counts {
        Some(c) => {
            let seed = seed.ok_or_else(|| anyhow!("seed was not resolved"))?;
            Some(sample_manifest(&l.program, &parse_counts(c)?, seed)?)
        }
        None if target.all_mutants => None,
        None => l.manifest(target)?,
    };
    if let Some(m) = &manifest {
        let path = ctx.dir.write("mutants/manifest.json", &to_json(m)?)?;
        println!("manifest: {} mutants (seed {}) -> {}", m.total(), m.seed, path.display());
    }
    if export {
        let selected = manifest.as_ref().map(|m| m.mutants.clone()).unwrap_or(all);
        for m in &selected {
            ctx.dir.write(&format!("mutants/{}.mc", m.id), &mutant_source(&l.program, m)?)?;
        }
        println!("exported {} mutant sources", selected.len());
    }
    Ok(())
}

fn fetch_llm(target: &Target, endpoint: &Path, template: u8, ctx: &Ctx) -> Result<()> {
    let l = load(target)?;
    let cfg = EndpointConfig::from_json(&read(endpoint)?)?;
    let tpl = PromptTemplate::from_id(template).ok_or_else(|| anyhow!("unknown template {template}"))?;
    let prompt = tpl.render(&l.source);
    let (reply, transcript) = llm_fetch_logged(&prompt, &cfg, &ctx.dir.path.join("transcripts"))?;
    ctx.dir.write(&format!("transcripts/reply-prompt-{template}.txt"), &reply)?;
    let mut suite = extract_suite(&reply, &l.domain_or_open())?;
    suite.label = if tpl.is_boundary() { SuiteLabel::Boundary } else { SuiteLabel::General };
    suite.provenance = format!("prompt {template} via {} ({})", cfg.model, suite.provenance);
    suite.program = l.name.clone();
    let path = ctx.dir.write(&format!("suites/llm-prompt-{template}.json"), &suite.to_json())?;
    println!("extracted {} inputs -> {} (transcript {})", suite.len(), path.display(), transcript.display());
    Ok(())
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    input: &'a bvmt_core::tracer::TestInput,
    #[serde(flatten)]
    trace: &'a Trace,
}

fn traces(p: &Program, suite: &TestSuite, budget: ExecBudget) -> Result<Vec<Trace>> {
    suite.inputs.iter().map(|i| Ok(execute(p, i, budget)?)).collect()
}

fn eval(target: &Target, args: &SuiteArgs, ctx: &Ctx) -> Result<()> {
    let l = load(target)?;
    let suite = l.suite(target, args)?;
    ctx.dir.write(&suite_file_name(&suite), &suite.to_json())?;
    let mutants = l.mutants(target)?;
    ctx.dir.write("mutants/evaluated.json", &to_json(&mutants)?)?;
    let opts = ctx.opts(target)?;
    let (matrix, mut report) = evaluate(&l.program, &mutants, &suite, &opts)?;
    if let Some(m) = &args.method {
        report.method = m.clone();
    }
    let ts = traces(&l.program, &suite, opts.budget)?;
    let records: Vec<TraceRecord> = suite.inputs.iter().zip(&ts).map(|(input, trace)| TraceRecord { input, trace }).collect();
    ctx.dir.write("traces/original.json", &to_json(&records)?)?;
    ctx.dir.write("reports/kill-matrix.csv", &matrix.to_csv())?;
    ctx.dir.write("reports/report.json", &report.to_json())?;

    let mut md = String::new();
    for metric in [Metric::KillRate, Metric::StatementCoverage, Metric::BranchCoverage] {
        let mut doc = compare_table(std::slice::from_ref(&report), GroupBy::Method, metric, &[]);
        doc.provenance = ctx.provenance();
        md.push_str(&render_report(&doc, ReportFormat::Markdown));
        md.push('\n');
    }
    let path = ctx.dir.write("reports/report.md", &md)?;

    println!(
        "{}: {} suite, n={}: kill_rate {:.2} ({}/{}), statement_coverage {:.4}, branch_coverage {:.4}",
        report.program,
        report.label,
        report.n,
        report.kill_rate,
        report.killed_count,
        report.mutants,
        report.statement_coverage,
        report.branch_coverage
    );
    for w in &report.warnings {
        println!("warning: {w}");
    }
    println!("report -> {}", path.display());
    Ok(())
}

fn curve(target: &Target, args: &SuiteArgs, ctx: &Ctx) -> Result<()> {
    let l = load(target)?;
    let suite = l.suite(target, args)?;
    ctx.dir.write(&suite_file_name(&suite), &suite.to_json())?;
    let mutants = l.mutants(target)?;
    let points = prefix_curve_with(&l.program, &mutants, &suite, &ctx.opts(target)?)?;
    ctx.dir.write("reports/curve.json", &to_json(&points)?)?;
    let csv = curve_to_csv(&points);
    let path = ctx.dir.write("reports/curve.csv", &csv)?;
    print!("{csv}");
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn collect_reports(runs: &[PathBuf]) -> Result<Vec<(PathBuf, EvaluationReport)>> {
    fn walk(p: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
            entries.sort();
            for e in entries {
                walk(&e, out)?;
            }
        } else if p.file_name().is_some_and(|n| n == "report.json") {
            out.push(p.to_path_buf());
        }
        Ok(())
    }
    let mut files = Vec::new();
    for r in runs {
        if r.is_file() {
            files.push(r.clone());
        } else if r.is_dir() {
            walk(r, &mut files)?;
        } else {
            bail!("{} does not exist", r.display());
        }
    }
    files
        .into_iter()
        .map(|f| {
            let report: EvaluationReport =
                serde_json::from_str(&read(&f)?).with_context(|| format!("parsing {}", f.display()))?;
            Ok((f, report))
        })
        .collect()
}

fn regress(runs: &[PathBuf], ctx: &Ctx) -> Result<()> {
    let reports = collect_reports(runs)?;
    let points: Vec<(f64, f64)> = reports.iter().map(|(_, r)| (r.branch_coverage, r.kill_rate / 100.0)).collect();
    let result = linreg_r2(&points)?;
    ctx.dir.write("reports/regression.json", &to_json(&result)?)?;
    let path = ctx.dir.write("reports/regression.csv", &result.to_csv())?;
    println!(
        "r2 = {:?} (slope {:?}, intercept {:?}, {} points)",
        result.r2,
        result.slope,
        result.intercept,
        points.len()
    );
    for w in &result.warnings {
        println!("warning: {w}");
    }
    println!("regression -> {}", path.display());
    Ok(())
}

fn compare(runs: &[PathBuf], metric: &str, group_by: GroupArg, format: &str, rows: &[String], ctx: &Ctx) -> Result<()> {
    let reports: Vec<EvaluationReport> = collect_reports(runs)?.into_iter().map(|(_, r)| r).collect();
    let metric: Metric = metric.parse()?;
    let format: ReportFormat = format.parse()?;
    let group = match group_by {
        GroupArg::Label => GroupBy::Label,
        GroupArg::Method => GroupBy::Method,
    };
    let order: Vec<&str> = rows.iter().map(String::as_str).collect();
    let mut doc = compare_table(&reports, group, metric, &order);
    doc.provenance = ctx.provenance();
    ctx.dir.write("reports/compare.json", &doc.to_json())?;
    let ext = match format {
        ReportFormat::Markdown => "md",
        ReportFormat::Csv => "csv",
        ReportFormat::Text => "txt",
        ReportFormat::Json => "json",
    };
    let text = render_report(&doc, format);
    let path = ctx.dir.write(&format!("reports/compare.{ext}"), &text)?;
    print!("{text}");
    for w in &doc.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Files read by the command, for the config hash.
pub fn referenced_inputs(cmd: &Command) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut add = |key: String, bytes: Vec<u8>| {
        out.insert(key, bytes);
    };
    let file = |p: &Path| fs::read(p).with_context(|| format!("reading {}", p.display()));
    let target = match cmd {
        Command::Check { target }
        | Command::Mutants { target, .. }
        | Command::EmitPrompt { target, .. }
        | Command::ImportSuite { target, .. }
        | Command::GenRandom { target, .. }
        | Command::GenBoundary { target, .. }
        | Command::FetchLlm { target, .. }
        | Command::Eval { target, .. }
        | Command::Curve { target, .. }
        | Command::ExportGcovStyle { target, .. } => Some(target),
        Command::Regress { .. } | Command::Compare { .. } | Command::Replay { .. } => None,
    };
    if let Some(t) = target {
        if let Some(name) = &t.subject {
            let e = subject_entry(name)?;
            add(format!("subject:{name}"), e.source.into_bytes());
        }
        for p in [&t.source, &t.domain, &t.manifest].into_iter().flatten() {
            add(p.display().to_string(), file(p)?);
        }
    }
    match cmd {
        Command::ImportSuite { file: f, .. } => add(f.display().to_string(), file(f)?),
        Command::FetchLlm { endpoint, .. } => add(endpoint.display().to_string(), file(endpoint)?),
        Command::Eval { suite, .. } | Command::Curve { suite, .. } | Command::ExportGcovStyle { suite, .. }
            if !matches!(suite.suite.as_str(), "random" | "boundary") =>
        {
            add(suite.suite.clone(), file(Path::new(&suite.suite))?)
        }
        _ => {}
    }
    Ok(out)
}

/// Fills in absent seeds; returns the generated ones.
pub fn resolve_seeds(cmd: &mut Command) -> Vec<u64> {
    let mut generated = Vec::new();
    let mut fill = |seed: &mut Option<u64>| {
        if seed.is_none() {
            let s = rand::random::<u32>() as u64;
            *seed = Some(s);
            generated.push(s);
        }
    };
    match cmd {
        Command::Mutants { seed, counts: Some(_), .. } => fill(seed),
        Command::GenRandom { seed, .. } | Command::GenBoundary { seed, .. } => fill(seed),
        Command::Eval { suite, .. } | Command::Curve { suite, .. } | Command::ExportGcovStyle { suite, .. }
            if matches!(suite.suite.as_str(), "random" | "boundary") =>
        {
            fill(&mut suite.seed)
        }
        _ => {}
    }
    generated
}

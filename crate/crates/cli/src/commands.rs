use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use auditbot::accountability::locate_failure;
use auditbot::alarp::{assess_all, likelihood_from_count, triage_finding, Costs, Region, RiskAssessment};
use auditbot::analytics::lexicon_imbalance;
use auditbot::engine::{run_audit, run_meta, EvalContext, Finding, FindingSet, RuleMonitor, SeqWindow};
use auditbot::events::{format_ts, ingest_events, load_registers, parse_utc, EventCatalog, EventLog, EventLogBuilder, RegisterError, RegisterSet};
use auditbot::policy::{compile_policy, parse_policy, CompiledPolicy, CompiledRule, RuleCheck};
use auditbot::vault::{export_case, read_records, verify_chain, Clock, ExportError, FixedClock, PayloadKind, SystemClock, Vault, VaultError, Verification};
use chrono::{DateTime, Utc};

use crate::report::{alert_line, RunReport};
use crate::{exit, fixture, Command, Format, Io, RunArgs, LEXICON_DIR_ENV};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    /// Bad arguments or input that does not parse or compile.
    Usage(String),
    Io(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => exit::USAGE,
            Failure::Io(_) => exit::IO,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Io(m) => f.write_str(m),
        }
    }
}

impl From<VaultError> for Failure {
    fn from(e: VaultError) -> Self {
        Failure::Io(e.to_string())
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn io_err(e: std::io::Error) -> Failure {
    Failure::Io(format!("cannot write output: {e}"))
}

/// Reads, parses and compiles a policy, then loads its lexicons from the
/// policy's directory and `AUDITBOT_LEXICON_DIR`. Warnings go to `warn`.
pub fn load_policy(path: &Path, warn: &mut dyn Write) -> Result<CompiledPolicy, Failure> {
    let text = read_text(path)?;
    let doc = parse_policy(&text).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| format!("{}:{}:{}: {}", path.display(), e.line, e.col, e.message)).collect();
        Failure::Usage(lines.join("\n"))
    })?;
    for w in doc.warnings() {
        let _ = writeln!(warn, "warning: {w}");
    }
    let mut policy = compile_policy(&doc, &EventCatalog::standard()).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| format!("{}: {e}", path.display())).collect();
        Failure::Usage(lines.join("\n"))
    })?;
    let mut search = vec![match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }];
    if let Some(dir) = std::env::var_os(LEXICON_DIR_ENV) {
        search.push(PathBuf::from(dir));
    }
    policy.load_lexicons(&search).map_err(|e| Failure::Io(e.to_string()))?;
    Ok(policy)
}

pub fn load_events(path: &Path) -> Result<EventLog, Failure> {
    let text = read_text(path)?;
    ingest_events(text.lines()).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| format!("{}: {e}", path.display())).collect();
        Failure::Usage(lines.join("\n"))
    })
}

pub fn load_registers_opt(dir: Option<&Path>) -> Result<RegisterSet, Failure> {
    let Some(dir) = dir else {
        return Ok(RegisterSet::default());
    };
    load_registers(dir).map_err(|e| match e {
        RegisterError::Io { .. } => Failure::Io(e.to_string()),
        RegisterError::Invalid(errs) => {
            let lines: Vec<String> = errs.iter().map(|e| format!("{}: {e}", dir.display())).collect();
            Failure::Usage(lines.join("\n"))
        }
    })
}

pub(crate) fn dispatch(cmd: Command, io: &mut Io<'_>) -> Result<i32, Failure> {
    match cmd {
        Command::Run { common, events, window } => cmd_run(&common, &events, &window, io),
        Command::Watch { common } => cmd_watch(&common, io),
        Command::Verify { vault } => cmd_verify(&vault, io),
        Command::Manifest { policy, format } => cmd_manifest(&policy, format, io),
        Command::Trace { vault, finding, policy, events, registers, format } => {
            cmd_trace(&vault, &finding, &policy, &events, registers.as_deref(), format, io)
        }
        Command::Gate { policy, rule, text } => cmd_gate(&policy, &rule, &text, io),
        Command::Export { vault, findings, out } => cmd_export(&vault, &findings, &out, io),
        Command::Fixture { seed, events, out } => cmd_fixture(seed, events, &out, io),
    }
}

/// Everything a run needs before it looks at events.
struct Setup {
    policy: CompiledPolicy,
    registers: RegisterSet,
    clock: DateTime<Utc>,
    fixed: bool,
}

fn setup(common: &RunArgs, io: &mut Io<'_>) -> Result<Setup, Failure> {
    let (clock, fixed) = match &common.fixed_clock {
        Some(s) => (parse_utc(s).map_err(|e| Failure::Usage(format!("--fixed-clock: {e}")))?, true),
        None => (Utc::now(), false),
    };
    let policy = load_policy(&common.policy, io.stderr)?;
    let registers = load_registers_opt(common.registers.as_deref())?;
    for w in registers.jobdesc_warnings(policy.rules.iter().map(|r| r.id.as_str())) {
        let _ = writeln!(io.stderr, "warning: {w}");
    }
    Ok(Setup { policy, registers, clock, fixed })
}

fn costs(rule: Option<&CompiledRule>) -> Option<Costs> {
    let r = rule?;
    Some(Costs {
        risk: r.risk_cost?,
        mitigation: r.mitigation_cost?,
    })
}

fn cmd_run(common: &RunArgs, events: &Path, window: &str, io: &mut Io<'_>) -> Result<i32, Failure> {
    let window: SeqWindow = window.parse().map_err(|e| Failure::Usage(format!("--window: {e}")))?;
    let s = setup(common, io)?;
    let log = load_events(events)?;
    let set = run_audit(&s.policy, &log, &s.registers, window);
    finish_run(&s, &log, set, &BTreeSet::new(), common, io)
}

fn cmd_watch(common: &RunArgs, io: &mut Io<'_>) -> Result<i32, Failure> {
    let s = setup(common, io)?;
    let mut builder = EventLogBuilder::new(EventCatalog::standard());
    let mut monitors: Vec<RuleMonitor<'_>> = s.policy.rules.iter().map(RuleMonitor::new).collect();
    let mut found = Vec::new();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut alerted = BTreeSet::new();

    let mut on_finding = |f: Finding, io: &mut Io<'_>| -> Result<(), Failure> {
        let n = counts.entry(f.rule_id.clone()).or_default();
        *n += 1;
        let a = triage_finding(&f, likelihood_from_count(*n), &s.policy.alarp, costs(s.policy.rule(&f.rule_id)));
        if a.region == Region::Intolerable {
            writeln!(io.stderr, "{}", alert_line(&f, &a)).map_err(io_err)?;
            io.stderr.flush().map_err(io_err)?;
            alerted.insert(f.id.clone());
        }
        found.push(f);
        Ok(())
    };

    let mut line = String::new();
    let mut line_no = 0;
    loop {
        line.clear();
        let n = io
            .stdin
            .read_line(&mut line)
            .map_err(|e| Failure::Io(format!("cannot read standard input: {e}")))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let text = line.trim_end_matches(['\n', '\r']);
        if text.trim().is_empty() {
            continue;
        }
        if let Err(e) = builder.push_line(line_no, text) {
            let _ = writeln!(io.stderr, "skipped: {e}");
            continue;
        }
        let log = builder.log();
        let event = log.events().last().expect("event just accepted");
        let cx = EvalContext {
            log,
            registers: &s.registers,
            severity_map: &s.policy.source.severity_map,
            window: SeqWindow::ALL,
        };
        for m in monitors.iter_mut() {
            for f in m.on_event(&cx, event) {
                on_finding(f, io)?;
            }
        }
    }
    for m in monitors.iter_mut() {
        for f in m.finish() {
            on_finding(f, io)?;
        }
    }
    let log = builder.finish();
    let set = FindingSet::from_unsorted(run_meta(&s.policy, &log, SeqWindow::ALL), found);
    finish_run(&s, &log, set, &alerted, common, io)
}

/// Triage, alerts, vault, report and exit code: shared by run and watch so
/// both produce the same output for the same events.
fn finish_run(
    s: &Setup,
    log: &EventLog,
    mut set: FindingSet,
    already_alerted: &BTreeSet<String>,
    common: &RunArgs,
    io: &mut Io<'_>,
) -> Result<i32, Failure> {
    set.meta.clock = Some(format_ts(&s.clock));
    let assessments: Vec<RiskAssessment> = assess_all(&set, &s.policy.alarp, |id| costs(s.policy.rule(id)));
    for (f, a) in set.findings.iter().zip(&assessments) {
        if a.region == Region::Intolerable && !already_alerted.contains(&f.id) {
            writeln!(io.stderr, "{}", alert_line(f, a)).map_err(io_err)?;
        }
    }
    let _ = io.stderr.flush();

    let traces = if common.trace {
        set.findings
            .iter()
            .filter_map(|f| s.policy.rule(&f.rule_id).map(|r| locate_failure(f, r, log, &s.registers)))
            .collect()
    } else {
        Vec::new()
    };
    let report = RunReport::new(set.meta.clone(), set.findings, assessments, traces);

    if let Some(path) = &common.vault {
        let clock: Box<dyn Clock> = if s.fixed { Box::new(FixedClock(s.clock)) } else { Box::new(SystemClock) };
        let mut vault = Vault::open(path)?;
        vault.append(PayloadKind::RunMeta, &report.meta, clock.as_ref())?;
        for f in &report.findings {
            vault.append(PayloadKind::Finding, f, clock.as_ref())?;
        }
        for a in &report.assessments {
            vault.append(PayloadKind::Assessment, a, clock.as_ref())?;
        }
        for t in &report.traces {
            vault.append(PayloadKind::Trace, t, clock.as_ref())?;
        }
        vault.sync()?;
    }

    let rendered = match common.format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    match &common.report {
        Some(path) => write_file(path, &rendered)?,
        None => io.stdout.write_all(rendered.as_bytes()).map_err(io_err)?,
    }

    Ok(if report.summary.intolerable() > 0 {
        exit::INTOLERABLE
    } else if report.summary.findings > 0 {
        exit::FINDINGS
    } else {
        exit::CLEAN
    })
}

fn cmd_verify(path: &Path, io: &mut Io<'_>) -> Result<i32, Failure> {
    if !path.is_file() {
        return Err(Failure::Io(format!("no vault at {}", path.display())));
    }
    match verify_chain(path)? {
        Verification::Ok { records, head } => {
            writeln!(io.stdout, "ok: {records} record(s), head {head}").map_err(io_err)?;
            Ok(exit::CLEAN)
        }
        Verification::Bad { first_bad_index, reason } => {
            writeln!(io.stdout, "tampered: first_bad_index {first_bad_index}: {reason}").map_err(io_err)?;
            Ok(exit::INTOLERABLE)
        }
    }
}

fn cmd_manifest(path: &Path, format: Format, io: &mut Io<'_>) -> Result<i32, Failure> {
    let policy = load_policy(path, io.stderr)?;
    let out = match format {
        Format::Json => serde_json::to_string_pretty(&policy.manifest).expect("manifest serializes") + "\n",
        Format::Text => {
            let mut s = String::new();
            for (rule, entry) in &policy.manifest.entries {
                s.push_str(&format!("{rule}\n"));
                for f in &entry.fields {
                    s.push_str(&format!("  field     {f}\n"));
                }
                for r in &entry.registers {
                    s.push_str(&format!("  register  {}\n", r.as_str()));
                }
            }
            s
        }
    };
    io.stdout.write_all(out.as_bytes()).map_err(io_err)?;
    Ok(exit::CLEAN)
}

fn cmd_trace(
    vault: &Path,
    finding_id: &str,
    policy: &Path,
    events: &Path,
    registers: Option<&Path>,
    format: Format,
    io: &mut Io<'_>,
) -> Result<i32, Failure> {
    if !vault.is_file() {
        return Err(Failure::Io(format!("no vault at {}", vault.display())));
    }
    let records = read_records(vault)?;
    let mut meta = None;
    let mut sealed = None;
    for r in &records {
        match r.payload_kind {
            PayloadKind::RunMeta => meta = r.body(),
            PayloadKind::Finding => {
                let body = r.body().unwrap_or_default();
                if body.get("id").and_then(|v| v.as_str()) == Some(finding_id) {
                    sealed = Some((body, meta.clone()));
                }
            }
            _ => {}
        }
    }
    let Some((body, meta)) = sealed else {
        return Err(Failure::Usage(format!("finding {finding_id} is not in {}", vault.display())));
    };
    let finding: Finding = serde_json::from_value(body).map_err(|e| Failure::Io(format!("sealed finding {finding_id} is unreadable: {e}")))?;
    let policy = load_policy(policy, io.stderr)?;
    let log = load_events(events)?;
    let regs = load_registers_opt(registers)?;
    if let Some(meta) = meta {
        let sealed_hash = |k: &str| meta.get(k).and_then(|v| v.as_str()).map(String::from);
        if sealed_hash("policy_hash") != Some(policy.source.digest()) {
            let _ = writeln!(io.stderr, "warning: policy differs from the one sealed with this finding");
        }
        if sealed_hash("log_hash") != Some(log.digest()) {
            let _ = writeln!(io.stderr, "warning: event log differs from the one sealed with this finding");
        }
    }
    let rule = policy
        .rule(&finding.rule_id)
        .ok_or_else(|| Failure::Usage(format!("policy has no rule {}", finding.rule_id)))?;
    let fp = locate_failure(&finding, rule, &log, &regs);
    let out = match format {
        Format::Json => serde_json::to_string_pretty(&fp).expect("trace serializes") + "\n",
        Format::Text => {
            let mut s = format!("{}\n{}\n", fp.finding_id, fp.narrative);
            if !fp.escalation_chain.is_empty() {
                s.push_str(&format!("escalation: {}\n", fp.escalation_chain.join(" -> ")));
            }
            for w in &fp.warnings {
                s.push_str(&format!("warning: {w}\n"));
            }
            s
        }
    };
    io.stdout.write_all(out.as_bytes()).map_err(io_err)?;
    Ok(exit::CLEAN)
}

fn cmd_gate(policy: &Path, rule_id: &str, text: &Path, io: &mut Io<'_>) -> Result<i32, Failure> {
    let policy = load_policy(policy, io.stderr)?;
    let rule = policy.rule(rule_id).ok_or_else(|| Failure::Usage(format!("policy has no rule {rule_id}")))?;
    let RuleCheck::Gate(g) = &rule.check else {
        return Err(Failure::Usage(format!("rule {rule_id} is a {} rule, not a gate rule", rule.kind)));
    };
    let lexicon = g
        .lexicon
        .as_ref()
        .ok_or_else(|| Failure::Io(format!("rule {rule_id}: lexicon not loaded")))?;
    let body = read_text(text)?;
    let s = lexicon_imbalance(&body, lexicon);
    let pass = s.imbalance < g.max_imbalance;
    writeln!(
        io.stdout,
        "{}: masculine {} feminine {} imbalance {} (max {})",
        if pass { "pass" } else { "fail" },
        s.masculine,
        s.feminine,
        s.imbalance,
        g.max_imbalance
    )
    .map_err(io_err)?;
    Ok(if pass { exit::CLEAN } else { exit::INTOLERABLE })
}

fn cmd_export(vault: &Path, ids: &[String], out: &Path, io: &mut Io<'_>) -> Result<i32, Failure> {
    let bytes = fs::read(vault).map_err(|e| Failure::Io(format!("cannot read {}: {e}", vault.display())))?;
    match export_case(&bytes, ids) {
        Ok(bundle) => {
            let json = serde_json::to_string_pretty(&bundle).expect("bundle serializes") + "\n";
            write_file(out, &json)?;
            let (lo, hi) = bundle.span();
            writeln!(
                io.stdout,
                "exported {} record(s) (findings at {lo}..={hi}), head {}",
                bundle.records.len(),
                bundle.head_hash
            )
            .map_err(io_err)?;
            Ok(exit::CLEAN)
        }
        Err(ExportError::Tampered { first_bad_index, reason }) => {
            writeln!(io.stdout, "tampered: first_bad_index {first_bad_index}: {reason}").map_err(io_err)?;
            Ok(exit::INTOLERABLE)
        }
        Err(e @ ExportError::UnknownFinding(_)) => Err(Failure::Usage(e.to_string())),
    }
}

fn cmd_fixture(seed: u64, events: usize, out: &Path, io: &mut Io<'_>) -> Result<i32, Failure> {
    let scenario = fixture::generate(seed, events);
    fixture::write_scenario(&scenario, out).map_err(|e| Failure::Io(format!("cannot write fixture to {}: {e}", out.display())))?;
    writeln!(
        io.stdout,
        "wrote {} event(s) and {} expected finding(s) to {}",
        scenario.events.len(),
        scenario.truth.findings.len(),
        out.display()
    )
    .map_err(io_err)?;
    Ok(exit::CLEAN)
}

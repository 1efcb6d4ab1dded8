use std::fmt::Write;

use super::{PolicyDocument, Value};

/// Renders a document in the policy language. Re-parsing the output yields
/// an equal document, and the output is the basis of [`PolicyDocument::digest`].
pub fn to_policy_text(doc: &PolicyDocument) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "policy {} {{", quote(&doc.name));
    if !doc.version.is_empty() {
        let _ = writeln!(out, "  version = {}", quote(&doc.version));
    }
    if !doc.organisation.is_empty() {
        let _ = writeln!(out, "  organisation = {}", quote(&doc.organisation));
    }
    if let Some(v) = doc.alarp.intolerable_min {
        let _ = writeln!(out, "  alarp_intolerable_min = {v}");
    }
    if let Some(v) = doc.alarp.acceptable_max {
        let _ = writeln!(out, "  alarp_acceptable_max = {v}");
    }
    if let Some(v) = doc.alarp.disproportion_factor {
        let _ = writeln!(out, "  alarp_disproportion_factor = {}", real(v));
    }
    out.push_str("}\n");

    for c in &doc.commitments {
        let _ = writeln!(out, "\ncommitment {} {{", c.id);
        let _ = writeln!(out, "  statement = {}", quote(&c.statement));
        if !c.rule_ids.is_empty() {
            let _ = writeln!(out, "  rules = [{}]", c.rule_ids.join(", "));
        }
        out.push_str("}\n");
    }

    if !doc.severity_map.is_empty() {
        out.push_str("\nseverity_map {\n");
        for (label, level) in &doc.severity_map {
            let _ = writeln!(out, "  {label} = {level}");
        }
        out.push_str("}\n");
    }

    for r in &doc.rules {
        let _ = writeln!(out, "\nrule {} {{", r.id);
        let _ = writeln!(out, "  kind = {}", r.kind);
        let _ = writeln!(out, "  harm = {}", r.harm.get());
        if let Some(s) = &r.scope {
            let _ = writeln!(out, "  scope = {}", quote(s));
        }
        if let Some(s) = &r.description {
            let _ = writeln!(out, "  description = {}", quote(s));
        }
        if let Some(s) = &r.responsible_role {
            let _ = writeln!(out, "  responsible_role = {}", quote(s));
        }
        for (k, v) in &r.params {
            let _ = writeln!(out, "  {k} = {}", value(v));
        }
        out.push_str("}\n");
    }
    out
}

fn value(v: &Value) -> String {
    match v {
        Value::Str(s) => quote(s),
        Value::Int(i) => i.to_string(),
        Value::Real(r) => real(*r),
        Value::Ident(s) => s.clone(),
        Value::List(items) => format!("[{}]", items.join(", ")),
    }
}

// `Display` for f64 is the shortest round-tripping decimal; keep a dot so the
// lexer reads it back as a real.
fn real(r: f64) -> String {
    let s = r.to_string();
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

use super::monitor::EvalContext;
use super::Finding;
use crate::events::Event;
use crate::policy::{CompiledRule, ObligationMode, ObligationRule};

pub(super) fn at_trigger(rule: &CompiledRule, o: &ObligationRule, cx: &EvalContext<'_>, trigger: &Event) -> Option<Finding> {
    match &o.mode {
        ObligationMode::ExistsBefore => exists_before(rule, o, cx, trigger),
        ObligationMode::AllClosedBefore { close_type, filter } => {
            all_closed_before(rule, o, *close_type, filter.as_ref(), cx, trigger)
        }
    }
}

fn exists_before(rule: &CompiledRule, o: &ObligationRule, cx: &EvalContext<'_>, trigger: &Event) -> Option<Finding> {
    let Some(subject) = trigger.field(&o.join_on) else {
        return Some(
            Finding::new(
                rule,
                trigger.seq,
                &trigger.project,
                format!("{} at seq {} carries no {}", o.trigger, trigger.seq, o.join_on),
            )
            .actor(trigger.actor.as_deref()),
        );
    };
    let witnesses: Vec<u64> = cx
        .log
        .before(trigger.seq, o.require, Some((&o.join_on, subject)))
        .into_iter()
        .filter(|e| e.project == trigger.project)
        .map(|e| e.seq)
        .collect();
    if !witnesses.is_empty() {
        return None;
    }
    Some(
        Finding::new(
            rule,
            trigger.seq,
            &trigger.project,
            format!(
                "{} for {}={} at seq {} has no earlier {}",
                o.trigger,
                o.join_on,
                subject.render(),
                trigger.seq,
                o.require
            ),
        )
        .actor(trigger.actor.as_deref()),
    )
}

fn all_closed_before(
    rule: &CompiledRule,
    o: &ObligationRule,
    close_type: crate::events::EventType,
    filter: Option<&(String, String)>,
    cx: &EvalContext<'_>,
    trigger: &Event,
) -> Option<Finding> {
    let opens: Vec<&Event> = cx
        .log
        .before(trigger.seq, o.require, None)
        .into_iter()
        .filter(|e| e.project == trigger.project)
        .filter(|e| filter.is_none_or(|(k, v)| e.field(k).is_some_and(|x| x.render() == *v)))
        .collect();
    let mut unclosed = Vec::new();
    for open in &opens {
        let closed = open.field(&o.join_on).is_some_and(|subject| {
            cx.log
                .before(trigger.seq, close_type, Some((&o.join_on, subject)))
                .iter()
                .any(|c| c.project == trigger.project)
        });
        if !closed {
            unclosed.push(*open);
        }
    }
    if unclosed.is_empty() {
        return None;
    }
    let names: Vec<String> = unclosed
        .iter()
        .map(|e| match e.field(&o.join_on) {
            Some(v) => format!("{}={} (seq {})", o.join_on, v.render(), e.seq),
            None => format!("seq {} without {}", e.seq, o.join_on),
        })
        .collect();
    let mut evidence: Vec<u64> = opens.iter().map(|e| e.seq).collect();
    evidence.push(trigger.seq);
    Some(
        Finding::new(
            rule,
            trigger.seq,
            &trigger.project,
            format!(
                "{} at seq {} with {} {} not closed by {}: {}",
                o.trigger,
                trigger.seq,
                unclosed.len(),
                o.require,
                close_type,
                names.join(", ")
            ),
        )
        .actor(trigger.actor.as_deref())
        .evidence(evidence)
        .metrics([("unclosed", unclosed.len() as f64)]),
    )
}

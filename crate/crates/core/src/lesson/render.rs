//! Plain-text rendering of sections, used as prior context when chaining prompts.

use std::fmt::Write;

use super::types::*;

/// Renders a section as deterministic plain text.
///
/// Every text field of the section appears verbatim in the output.
pub fn render_section_text(section: &Section) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "## {}", section.kind().title());
    match section {
        Section::TitlePage(t) => render_title(&mut out, t),
        Section::ScenarioOne(s) | Section::ScenarioTwo(s) => render_scenario(&mut out, s),
        Section::Instruction(i) => render_instruction(&mut out, i),
        Section::Conclusion(c) => render_conclusion(&mut out, c),
    }
    out
}

fn render_title(out: &mut String, t: &TitlePage) {
    let _ = writeln!(out, "Topic: {}", t.topic_description);
    if !t.focus_areas.is_empty() {
        out.push_str("Focus areas:\n");
        for area in &t.focus_areas {
            let _ = writeln!(out, "- {area}");
        }
    }
    out.push_str("Learning objectives:\n");
    for lo in &t.learning_objectives {
        let _ = writeln!(out, "- [{}] {}", lo.audience_term, lo.statement);
    }
}

fn option_marker(i: usize) -> char {
    (b'A' + (i % 26) as u8) as char
}

fn render_scenario(out: &mut String, s: &ScenarioSection) {
    let _ = writeln!(out, "Scenario: {}", s.narrative);
    for (qi, q) in s.questions.iter().enumerate() {
        let kind = match q.kind {
            QuestionKind::OpenEnded => "open-ended",
            QuestionKind::MultipleChoice => "multiple choice",
        };
        let _ = writeln!(out, "Question {} ({kind}): {}", qi + 1, q.prompt);
        for (oi, o) in q.options.iter().enumerate() {
            let mark = if o.is_correct { " [correct]" } else { "" };
            let _ = writeln!(out, "  {}. {}{mark}", option_marker(oi), o.label);
            let _ = writeln!(out, "     Feedback: {}", o.feedback);
        }
        if !q.rationale_feedback.is_empty() {
            let _ = writeln!(out, "  Model answer: {}", q.rationale_feedback);
        }
    }
}

fn render_instruction(out: &mut String, i: &InstructionSection) {
    for st in &i.strategies {
        let _ = writeln!(out, "Strategy: {}", st.name);
        let _ = writeln!(out, "  {}", st.description);
        let _ = writeln!(out, "  Do: {}", st.good_example);
        let _ = writeln!(out, "  Avoid: {}", st.bad_example);
    }
    let _ = writeln!(out, "{}", i.body);
    if !i.citations.is_empty() {
        out.push_str("Citations:\n");
        render_refs(out, &i.citations);
    }
}

fn render_conclusion(out: &mut String, c: &ConclusionSection) {
    let _ = writeln!(out, "{}", c.summary);
    out.push_str("References:\n");
    render_refs(out, &c.references);
}

fn render_refs(out: &mut String, refs: &[Reference]) {
    for r in refs {
        let _ = writeln!(out, "- {}", r.raw_citation);
        let _ = writeln!(out, "  title: {}", r.normalized_title);
    }
}

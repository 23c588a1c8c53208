//! Offline backend that writes small but schema-valid lesson sections.
//!
//! It reads the topic and requested sections from the `Lesson topic:` and
//! `Target sections:` lines of the prompt and derives every choice from the
//! request fingerprint, so identical requests get identical answers.

use serde_json::{json, Value};

use super::{BackendError, ChatRequest, ModelBackend};
use crate::canonical;
use crate::lesson::SectionKind;

#[derive(Debug, Clone, Default)]
pub struct SyntheticBackend;

impl SyntheticBackend {
    pub fn new() -> SyntheticBackend {
        SyntheticBackend
    }
}

struct Dice {
    bytes: Vec<u8>,
    next: usize,
}

impl Dice {
    fn new(fingerprint: &str) -> Dice {
        Dice {
            bytes: hex::decode(fingerprint).unwrap_or_default(),
            next: 0,
        }
    }

    fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        let b = self.bytes.get(self.next % self.bytes.len().max(1)).copied().unwrap_or(0);
        self.next += 1;
        &items[b as usize % items.len()]
    }
}

fn line_value<'a>(text: &'a str, prefix: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.strip_prefix(prefix)).map(str::trim)
}

const FIRST_NAMES: [&str; 6] = ["Maya", "Lucas", "Aisha", "Diego", "Priya", "Owen"];
const SECOND_NAMES: [&str; 6] = ["Jordan", "Sofia", "Malik", "Hana", "Eli", "Camila"];
const MATH: [&str; 5] = ["fractions", "ratios", "linear equations", "area of triangles", "negative numbers"];
const REFERENCES: [&str; 4] = [
    "Castelli, F. R., & Sarvary, M. A. (2021). Why students do not turn on their video cameras during online classes and an equitable and inclusive plan to encourage them to do so. Ecology and Evolution, 11(8), 3565-3576.",
    "Wang, N., Johnson, W. L., Mayer, R. E., Rizzo, P., Shaw, E., & Collins, H. (2008). The politeness effect: Pedagogical agents and learning outcomes. International Journal of Human-Computer Studies, 66(2), 98-112.",
    "Roll, I., Aleven, V., McLaren, B. M., & Koedinger, K. R. (2011). Improving students' help-seeking skills using metacognitive feedback in an intelligent tutoring system. Learning and Instruction, 21(2), 267-280.",
    "Newman, R. S. (1994). Adaptive help seeking: A strategy of self-regulated learning. In Self-regulation of learning and performance (pp. 283-301). Erlbaum.",
];
const POLITENESS_REF: &str =
    "Brown, P., & Levinson, S. C. (1987). Politeness: Some universals in language usage. Cambridge University Press.";

fn section(kind: SectionKind, topic: &str, dice: &mut Dice) -> Value {
    let t = topic.to_lowercase();
    match kind {
        SectionKind::TitlePage => json!({
            "kind": "title_page",
            "topic_description": format!("In this lesson, tutors practice responding to situations involving {t} during online math sessions."),
            "focus_areas": [
                format!("Recognizing when {t} affects a session"),
                (*dice.pick(&["Using polite, reasoned language", "Preserving student autonomy", "Building rapport early"])).to_owned(),
            ],
            "learning_objectives": [
                {"statement": format!("Explain how a respectful approach to {t} can improve student engagement."), "audience_term": "tutors"},
                {"statement": format!("Apply a supportive response strategy when {t} comes up with a student."), "audience_term": "tutors"},
            ],
        }),
        SectionKind::ScenarioOne => {
            let name = dice.pick(&FIRST_NAMES);
            let math = dice.pick(&MATH);
            json!({
                "kind": "scenario_one",
                "narrative": format!("{name} logs into your session to work on {math}. Early on, an issue about {t} comes up and {name} goes quiet, answering only in short chat messages."),
                "questions": mcq_block(name, &t, dice),
            })
        }
        SectionKind::Instruction => json!({
            "kind": "instruction",
            "strategies": [
                {
                    "name": "Invite rather than direct",
                    "description": "Frame requests as optional and give a learning reason.",
                    "good_example": "\"If you're comfortable, would you try that with me? It helps me see your thinking.\"",
                    "bad_example": "\"Do it now.\"",
                },
                {
                    "name": (*dice.pick(&["Offer alternatives", "Normalize the concern", "Check in privately"])).to_owned(),
                    "description": "Give the student another way to participate if they decline.",
                    "good_example": "\"No problem, you can use the chat or a reaction instead.\"",
                    "bad_example": "\"Then we can't continue.\"",
                },
            ],
            "body": format!("Research on politeness and student autonomy suggests that how tutors phrase requests about {t} shapes whether students stay engaged."),
            "citations": [{"raw_citation": POLITENESS_REF}],
        }),
        SectionKind::ScenarioTwo => {
            let name = dice.pick(&SECOND_NAMES);
            json!({
                "kind": "scenario_two",
                "narrative": format!("Midway through a review session, {name} mentions feeling embarrassed. Last week they seemed comfortable, yet today {t} has become a sticking point because a sibling is nearby."),
                "questions": mcq_block(name, &t, dice),
            })
        }
        SectionKind::Conclusion => json!({
            "kind": "conclusion",
            "summary": format!("Tutors who approach {t} with invitations, reasons and alternatives keep students engaged while respecting their choices."),
            "references": [
                {"raw_citation": POLITENESS_REF},
                {"raw_citation": *dice.pick(&REFERENCES)},
            ],
        }),
    }
}

fn mcq_block(name: &str, topic: &str, dice: &mut Dice) -> Value {
    let correct = *dice.pick(&[0usize, 1, 2]);
    let labels = [
        format!("Acknowledge {name}'s concern and offer a choice"),
        format!("Tell {name} the rules require it"),
        "Ignore the issue and continue".to_owned(),
    ];
    let good = "This respects the student's autonomy while keeping them engaged.";
    let bad = [
        "A directive without a reason can feel coercive.",
        "Skipping the issue misses a chance to build rapport.",
    ];
    // Rotate so the correct answer's position varies.
    let mut options = Vec::new();
    let mut wrong = bad.iter();
    for pos in 0..3 {
        let (label, ok, fb) = if pos == correct {
            (labels[0].clone(), true, good)
        } else {
            let idx = if options.iter().any(|o: &Value| o["label"] == labels[1]) { 2 } else { 1 };
            (labels[idx].clone(), false, *wrong.next().unwrap())
        };
        options.push(json!({"label": label, "is_correct": ok, "feedback": fb}));
    }
    json!([
        {
            "kind": "open_ended",
            "prompt": format!("What would you say to {name} about {topic}, and why?"),
            "rationale_feedback": "A strong answer acknowledges the student's feelings, explains the benefit, and leaves room to decline.",
        },
        {
            "kind": "multiple_choice",
            "prompt": format!("Which response best supports {name}?"),
            "options": options,
        },
    ])
}

impl ModelBackend for SyntheticBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let user = request
            .last_user_text()
            .ok_or_else(|| BackendError::Provider("request has no user message".into()))?;
        let topic = line_value(user, "Lesson topic:").unwrap_or("tutoring");
        let targets = line_value(user, "Target sections:")
            .ok_or_else(|| BackendError::Provider("prompt does not name target sections".into()))?;
        let kinds = targets
            .split(',')
            .map(|s| {
                SectionKind::from_wire(s.trim())
                    .ok_or_else(|| BackendError::Provider(format!("unknown section {s:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut dice = Dice::new(&request.fingerprint());
        let sections: Vec<Value> = kinds.iter().map(|k| section(*k, topic, &mut dice)).collect();
        Ok(canonical::to_canonical_compact(&json!({ "sections": sections }))
            .expect("json values serialize"))
    }
}

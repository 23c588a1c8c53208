//! A hand-built lesson that satisfies every validation rule. Used as a
//! fixture by tests and as a template for hand-authored lessons.

use super::types::*;

fn mcq(prompt: &str, options: &[(&str, bool, &str)]) -> Question {
    Question {
        kind: QuestionKind::MultipleChoice,
        prompt: prompt.into(),
        options: options
            .iter()
            .map(|(label, ok, fb)| McqOption {
                label: (*label).into(),
                is_correct: *ok,
                feedback: (*fb).into(),
            })
            .collect(),
        rationale_feedback: String::new(),
    }
}

fn open(prompt: &str, answer: &str) -> Question {
    Question {
        kind: QuestionKind::OpenEnded,
        prompt: prompt.into(),
        options: Vec::new(),
        rationale_feedback: answer.into(),
    }
}

pub fn golden_lesson() -> Lesson {
    let title = TitlePage {
        topic_description: "Novice tutors practice inviting students to turn on their cameras during online math sessions without pressuring them.".into(),
        focus_areas: vec![
            "Respecting student privacy".into(),
            "Building rapport before making requests".into(),
        ],
        learning_objectives: vec![
            LearningObjective {
                statement: "Explain how polite instructional strategies can improve student engagement and problem-solving in online math tutoring.".into(),
                audience_term: "tutors".into(),
            },
            LearningObjective {
                statement: "Apply an invitational request when a student keeps the camera off during a session.".into(),
                audience_term: "tutors".into(),
            },
        ],
    };
    let scenario_one = ScenarioSection {
        narrative: "Maya, a seventh grader, joins your online session with her camera off. She answers in short chat messages and seems distracted while you review fractions.".into(),
        questions: vec![
            open(
                "What would you say to Maya to encourage her to turn on her camera?",
                "Acknowledge her, explain why seeing each other helps, and make the request optional.",
            ),
            mcq(
                "Which response best invites Maya to turn on her camera?",
                &[
                    ("\"Turn your camera on now.\"", false, "A direct command can feel coercive and may reduce trust."),
                    ("\"Would you be comfortable turning on your camera so I can see how you're working?\"", true, "An optional, reasoned invitation respects her choice and explains the benefit."),
                    ("Say nothing and continue the lesson.", false, "Ignoring the issue misses a chance to build engagement."),
                    ("\"Everyone else has their camera on.\"", false, "Peer pressure can embarrass the student and does not explain the benefit."),
                ],
            ),
        ],
    };
    let instruction = InstructionSection {
        strategies: vec![
            TeachingStrategy {
                name: "Invite, don't demand".into(),
                description: "Phrase camera requests as optional invitations and give a reason tied to learning.".into(),
                good_example: "\"If you're comfortable, turning on your camera helps me see when you're stuck.\"".into(),
                bad_example: "\"Cameras on, please, that's the rule.\"".into(),
            },
            TeachingStrategy {
                name: "Offer alternatives".into(),
                description: "If a student declines, offer other ways to stay connected.".into(),
                good_example: "\"No problem. Could you use the thumbs-up reaction when you're ready?\"".into(),
                bad_example: "\"Then I can't really help you.\"".into(),
            },
        ],
        body: "Students may keep cameras off for privacy, bandwidth, or anxiety. Polite, reasoned requests preserve autonomy while supporting engagement.".into(),
        citations: vec![Reference::from_citation(
            "Brown, P., & Levinson, S. C. (1987). Politeness: Some universals in language usage. Cambridge University Press.",
        )],
    };
    let scenario_two = ScenarioSection {
        narrative: "Jordan, an eighth grader working on linear equations, turned on his camera last week but today says his little brother is in the room.".into(),
        questions: vec![
            open(
                "How would you respond to Jordan while keeping him engaged?",
                "Thank him for explaining, accept the choice, and suggest another way to check in.",
            ),
            mcq(
                "What is the most appropriate next step?",
                &[
                    ("Insist the camera stays on for the whole session.", false, "Insisting ignores his stated reason and may damage rapport."),
                    ("Accept his choice and suggest using chat reactions to check understanding.", true, "This respects his situation and keeps a feedback channel open."),
                    ("End the session early.", false, "Ending the session withholds support he still needs."),
                ],
            ),
        ],
    };
    let conclusion = ConclusionSection {
        summary: "Inviting rather than demanding camera use, explaining the benefit, and offering alternatives helps tutors keep students engaged while respecting their choices.".into(),
        references: vec![
            Reference::from_citation(
                "Brown, P., & Levinson, S. C. (1987). Politeness: Some universals in language usage. Cambridge University Press.",
            ),
            Reference::from_citation(
                "Castelli, F. R., & Sarvary, M. A. (2021). Why students do not turn on their video cameras during online classes and an equitable and inclusive plan to encourage them to do so. Ecology and Evolution, 11(8), 3565-3576.",
            ),
        ],
    };
    Lesson::new(
        "lesson-golden-turning-on-cameras",
        "Turning on Cameras",
        vec![
            Section::TitlePage(title),
            Section::ScenarioOne(scenario_one),
            Section::Instruction(instruction),
            Section::ScenarioTwo(scenario_two),
            Section::Conclusion(conclusion),
        ],
    )
}

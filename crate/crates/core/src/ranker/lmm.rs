//! Yes/no visual question answering as an integer reward.
//!
//! The query template and the `A<k>: Yes|No` answer grammar are fixed
//! contract surfaces; golden copies live under `tests/golden/`.

use std::sync::LazyLock;

use regex::Regex;

use super::transport::Transport;
use super::Ranker;
use crate::error::{check_dim, AnnotationError, Error, Result};
use crate::imaging::{encode_png, Normalization};
use crate::representation::ImageShape;

const TASK_DESCRIPTION: &str = "[Task Description]: You are an expert in evaluating the alignment \
between a given text description and an image. Your task is to answer each of the alignment \
questions with either \"Yes\" or \"No\" based on the image. Provide your responses in the format \
specified below.";

const EVALUATION_INSTRUCTION: &str = "[Evaluation Instruction]:\n\
1. Carefully analyze the provided image and answer questions based on the image.\n\
2. For each question, answer with either \"Yes\" or \"No\". Do not provide explanations or \
additional information.";

/// Renders the comparison query for `questions`, numbered from 1.
pub fn lmm_format_query<S: AsRef<str>>(questions: &[S]) -> Result<String> {
    if questions.is_empty() {
        return Err(Error::Parameter("query needs at least one question".into()));
    }
    let mut out = String::new();
    out.push_str(TASK_DESCRIPTION);
    out.push_str("\n\n");
    out.push_str(EVALUATION_INSTRUCTION);
    out.push_str("\n\n[Evaluation Question(s)]:\n");
    for (i, q) in questions.iter().enumerate() {
        out.push_str(&format!("Q{}: {}\n", i + 1, q.as_ref().trim()));
    }
    out.push_str("\n[Output Format]:\n");
    for i in 1..=questions.len() {
        out.push_str(&format!("A{i}: [Yes/No]\n"));
    }
    Ok(out)
}

static ANSWER_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*A(\d+)\s*:\s*(.*?)\s*$").expect("valid regex"));

fn answer_value(raw: &str) -> Option<bool> {
    let v = raw.trim_end_matches('.');
    let v = v.strip_prefix('[').and_then(|v| v.strip_suffix(']')).unwrap_or(v).trim();
    if v.eq_ignore_ascii_case("yes") {
        Some(true)
    } else if v.eq_ignore_ascii_case("no") {
        Some(false)
    } else {
        None
    }
}

/// Counts `Yes` answers for questions `1..=n_questions`.
///
/// The first `A<k>:` line for each index is authoritative; other lines are
/// ignored. A missing or non-Yes/No answer fails at the lowest such index.
pub fn lmm_parse_response(text: &str, n_questions: usize) -> Result<usize, AnnotationError> {
    if n_questions == 0 {
        return Err(AnnotationError::Parse { index: 0 });
    }
    let mut answers: Vec<Option<Option<bool>>> = vec![None; n_questions];
    for line in text.lines() {
        let Some(caps) = ANSWER_LINE.captures(line) else {
            continue;
        };
        let Ok(k) = caps[1].parse::<usize>() else {
            continue;
        };
        if (1..=n_questions).contains(&k) && answers[k - 1].is_none() {
            answers[k - 1] = Some(answer_value(&caps[2]));
        }
    }
    let mut yes = 0;
    for (i, a) in answers.iter().enumerate() {
        match a {
            Some(Some(true)) => yes += 1,
            Some(Some(false)) => {}
            _ => return Err(AnnotationError::Parse { index: i + 1 }),
        }
    }
    Ok(yes)
}

/// Reward = number of questions the LMM answers "Yes" for a render.
///
/// Each image is sent as its own query.
pub struct LmmAnnotator {
    questions: Vec<String>,
    prompt: String,
    shape: ImageShape,
    norm: Normalization,
    transport: Box<dyn Transport>,
}

impl LmmAnnotator {
    pub fn new(
        questions: Vec<String>,
        shape: ImageShape,
        norm: Normalization,
        transport: Box<dyn Transport>,
    ) -> Result<Self> {
        let prompt = lmm_format_query(&questions)?;
        Ok(Self { questions, prompt, shape, norm, transport })
    }

    pub fn questions(&self) -> &[String] {
        &self.questions
    }

    pub fn into_transport(self) -> Box<dyn Transport> {
        self.transport
    }

    pub fn annotate(&mut self, image: &[f64]) -> Result<f64> {
        check_dim(self.shape.len(), image.len())?;
        let png = encode_png(image, self.shape, self.norm)
            .map_err(|e| AnnotationError::Encode(e.to_string()))?;
        let reply = self.transport.complete(&self.prompt, &png)?;
        Ok(lmm_parse_response(&reply, self.questions.len())? as f64)
    }
}

impl Ranker for LmmAnnotator {
    fn score(&mut self, image: &[f64]) -> Result<f64> {
        self.annotate(image)
    }
}

pub fn lmm_annotate(image: &[f64], annotator: &mut LmmAnnotator) -> Result<f64> {
    annotator.annotate(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranker::transport::{FixedReply, HttpTransport};

    #[test]
    fn query_numbers_questions() {
        let q = lmm_format_query(&["Is the leaf shouting?"]).unwrap();
        assert!(q.lines().any(|l| l == "Q1: Is the leaf shouting?"));
        assert!(q.lines().any(|l| l == "A1: [Yes/No]"));

        let q = lmm_format_query(&["first?", "second?"]).unwrap();
        let p1 = q.find("Q1: first?").unwrap();
        let p2 = q.find("Q2: second?").unwrap();
        assert!(p1 < p2);
        assert!(lmm_format_query::<&str>(&[]).is_err());
    }

    #[test]
    fn parse_counts_yes() {
        assert_eq!(lmm_parse_response("A1: Yes\nA2: No", 2).unwrap(), 1);
        assert_eq!(lmm_parse_response("A1: yes\nA2: YES\na3: [Yes]", 3).unwrap(), 3);
        assert_eq!(lmm_parse_response("Sure.\nA2: No.\nA1: Yes\n", 2).unwrap(), 1);
    }

    #[test]
    fn parse_errors_name_the_index() {
        assert!(matches!(lmm_parse_response("A1: Maybe", 1), Err(AnnotationError::Parse { index: 1 })));
        assert!(matches!(lmm_parse_response("A1: Yes", 2), Err(AnnotationError::Parse { index: 2 })));
        assert!(matches!(
            lmm_parse_response("A1: Yes\nA2: Yes, definitely\nA3: No", 3),
            Err(AnnotationError::Parse { index: 2 })
        ));
    }

    #[test]
    fn annotator_with_mock() {
        let shape = ImageShape { width: 2, height: 2, channels: 1 };
        let qs: Vec<String> = (0..4).map(|i| format!("question {i}?")).collect();
        let mut a =
            LmmAnnotator::new(qs, shape, Normalization::default(), Box::new(FixedReply::all(true, 4))).unwrap();
        assert_eq!(a.annotate(&[0.1, 0.2, 0.3, 0.4]).unwrap(), 4.0);
        assert!(matches!(a.annotate(&[0.0; 3]), Err(Error::Shape { .. })));
    }

    #[test]
    fn unreachable_endpoint_is_annotation_error() {
        let shape = ImageShape { width: 1, height: 1, channels: 1 };
        let http = HttpTransport::new("http://127.0.0.1:9/v1/chat/completions", "m", None, std::time::Duration::from_secs(2));
        let mut a = LmmAnnotator::new(vec!["q?".into()], shape, Normalization::default(), Box::new(http)).unwrap();
        assert!(matches!(a.annotate(&[0.5]), Err(Error::Annotation(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn well_formed_replies_always_parse(answers in proptest::collection::vec(any::<bool>(), 1..20)) {
                let qs: Vec<String> = (0..answers.len()).map(|i| format!("q{i}?")).collect();
                let query = lmm_format_query(&qs).unwrap();
                let last = format!("A{}: [Yes/No]", qs.len());
                prop_assert!(query.contains(&last));
                let reply: String = answers
                    .iter()
                    .enumerate()
                    .map(|(i, a)| format!("A{}: {}\n", i + 1, if *a { "Yes" } else { "No" }))
                    .collect();
                let n = lmm_parse_response(&reply, answers.len()).unwrap();
                prop_assert_eq!(n, answers.iter().filter(|a| **a).count());
            }
        }
    }
}

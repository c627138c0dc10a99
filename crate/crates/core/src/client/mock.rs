use rand::Rng;
use sha2::{Digest, Sha256};

use super::{ClientError, Completer, Completion};
use crate::poset::to_word;
use crate::prompt::{Prompt, PromptStyle};
use crate::rng::stream_rng;

fn prompt_stream(prompt: &Prompt) -> u64 {
    let digest = Sha256::digest(prompt.id.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("eight bytes"))
}

/// Answers every task from ground truth, flipping each verdict independently
/// with probability `error_rate`.
pub fn mock_complete(prompt: &Prompt, error_rate: f64, seed: u64) -> String {
    let mut rng = stream_rng(seed, prompt_stream(prompt));
    let sym = prompt.kind.symbol();
    let mut out = String::new();
    for t in &prompt.tasks {
        let flip = error_rate > 0.0 && rng.random::<f64>() < error_rate;
        let answer = t.truth != flip;
        match prompt.style {
            PromptStyle::Standard => {
                let a = to_word(prompt.kind, t.a);
                let b = to_word(prompt.kind, t.b);
                out.push_str(&format!("{a} {sym} {b}: {answer}\n"));
            }
            _ => out.push_str(if answer { "True\n" } else { "False\n" }),
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct MockClient {
    pub error_rate: f64,
    pub seed: u64,
    pub name: String,
}

impl MockClient {
    pub fn new(error_rate: f64, seed: u64) -> Self {
        Self {
            error_rate: error_rate.clamp(0.0, 1.0),
            seed,
            name: format!("mock-e{error_rate}-s{seed}"),
        }
    }
}

impl Completer for MockClient {
    fn model(&self) -> &str {
        &self.name
    }

    fn complete(&self, prompt: &Prompt, _text: &str) -> Result<Completion, ClientError> {
        Ok(Completion {
            text: mock_complete(prompt, self.error_rate, self.seed),
            usage: None,
            cached: false,
        })
    }
}

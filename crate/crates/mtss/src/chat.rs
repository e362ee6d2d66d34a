//! Terminal chat with a trained student.

use std::io::{BufRead, Write};

use mtss_core::corpus::{parse_placeholder, BeliefState, Corpus, Delexicalizer, Vocabulary};
use mtss_core::models::{ModelError, StudentInput, StudentModel};

pub const APOLOGY: &str = "sorry, i could not produce a response.";

/// Dialogue history plus a belief state tracked from the user's words,
/// used only to lexicalize responses.
pub struct ChatSession<'a> {
    model: &'a StudentModel,
    input: &'a Vocabulary,
    output: &'a Vocabulary,
    corpus: &'a Corpus,
    delex: Delexicalizer,
    history: Vec<Vec<u32>>,
    belief: BeliefState,
    max_len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reply {
    pub delexicalized: String,
    /// Placeholders filled from the top database match, when one exists.
    pub lexicalized: String,
}

impl<'a> ChatSession<'a> {
    pub fn new(
        model: &'a StudentModel,
        input: &'a Vocabulary,
        output: &'a Vocabulary,
        corpus: &'a Corpus,
        max_len: usize,
    ) -> Self {
        ChatSession {
            model,
            input,
            output,
            corpus,
            delex: Delexicalizer::new(&corpus.schemas, &corpus.database),
            history: Vec::new(),
            belief: BeliefState::new(),
            max_len,
        }
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn reset(&mut self) {
        self.history.clear();
        self.belief.clear();
    }

    /// One exchange. On failure the history is left as it was.
    pub fn respond(&mut self, line: &str) -> Result<Reply, ModelError> {
        let d = self.delex.apply(line, None);
        let mut history = self.history.clone();
        history.push(self.input.encode(&d.tokens));
        let ids = self.model.generate(
            &StudentInput {
                history: history.clone(),
            },
            self.max_len,
        )?;
        let tokens = self.output.decode(&ids);
        history.push(self.input.encode(&tokens));
        self.history = history;
        for m in d.matches.iter().filter(|m| m.informable) {
            self.belief
                .entry(m.domain.clone())
                .or_default()
                .insert(m.slot.clone(), m.value.clone());
        }
        Ok(Reply {
            delexicalized: tokens.join(" "),
            lexicalized: self.lexicalize(&tokens).join(" "),
        })
    }

    fn lexicalize(&self, tokens: &[String]) -> Vec<String> {
        tokens
            .iter()
            .map(|t| {
                parse_placeholder(t)
                    .and_then(|(domain, slot)| {
                        let constraints = self.belief.get(domain).cloned().unwrap_or_default();
                        let top = self
                            .corpus
                            .database
                            .query(domain, &constraints)
                            .ok()?
                            .into_iter()
                            .next()?;
                        top.get(slot).filter(|v| !v.is_empty()).map(String::from)
                    })
                    .unwrap_or_else(|| t.clone())
            })
            .collect()
    }
}

/// Reads lines until EOF or `/quit`; `/reset` clears the history.
pub fn run_repl(
    session: &mut ChatSession<'_>,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    lexicalize: bool,
) -> std::io::Result<()> {
    let mut line = String::new();
    loop {
        write!(out, "> ")?;
        out.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            writeln!(out)?;
            return Ok(());
        }
        match line.trim() {
            "" => continue,
            "/quit" => return Ok(()),
            "/reset" => {
                session.reset();
                writeln!(out, "(history cleared)")?;
            }
            text => match session.respond(text) {
                Ok(r) => {
                    writeln!(out, "system: {}", r.delexicalized)?;
                    if lexicalize {
                        writeln!(out, "        {}", r.lexicalized)?;
                    }
                }
                Err(_) => writeln!(out, "system: {APOLOGY}")?,
            },
        }
    }
}

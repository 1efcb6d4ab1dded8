use std::collections::BTreeSet;

use serde::Serialize;

use super::AnalyticsError;

/// Gender-coded word stems. A token matches a stem when it starts with it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lexicon {
    masculine: BTreeSet<String>,
    feminine: BTreeSet<String>,
}

const BUILTIN_EN: &str = include_str!("../../data/gendered_en.txt");

impl Lexicon {
    pub fn new<M, F>(masculine: M, feminine: F) -> Result<Self, AnalyticsError>
    where
        M: IntoIterator,
        M::Item: AsRef<str>,
        F: IntoIterator,
        F::Item: AsRef<str>,
    {
        let lower = |it: &str| it.trim().to_lowercase();
        let masculine: BTreeSet<String> = masculine.into_iter().map(|s| lower(s.as_ref())).collect();
        let feminine: BTreeSet<String> = feminine.into_iter().map(|s| lower(s.as_ref())).collect();
        if let Some(shared) = masculine.intersection(&feminine).next() {
            return Err(AnalyticsError::Lexicon {
                line: 0,
                message: format!("stem `{shared}` is both masculine and feminine"),
            });
        }
        if masculine.iter().chain(&feminine).any(|s| s.is_empty()) {
            return Err(AnalyticsError::Lexicon {
                line: 0,
                message: "empty stem".into(),
            });
        }
        Ok(Lexicon {
            masculine,
            feminine,
        })
    }

    /// Parses the lexicon file format: `[masculine]` and `[feminine]` section
    /// headers, one stem per line, `#` comments.
    pub fn parse(text: &str) -> Result<Self, AnalyticsError> {
        let mut masculine = Vec::new();
        let mut feminine = Vec::new();
        let mut section: Option<&mut Vec<String>> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "[masculine]" => section = Some(&mut masculine),
                "[feminine]" => section = Some(&mut feminine),
                _ if line.starts_with('[') => {
                    return Err(AnalyticsError::Lexicon {
                        line: i + 1,
                        message: format!("unknown section {line}"),
                    })
                }
                _ if line.contains(char::is_whitespace) => {
                    return Err(AnalyticsError::Lexicon {
                        line: i + 1,
                        message: format!("stem `{line}` contains whitespace"),
                    })
                }
                _ => match section.as_deref_mut() {
                    Some(v) => v.push(line.to_string()),
                    None => {
                        return Err(AnalyticsError::Lexicon {
                            line: i + 1,
                            message: "stem before any [masculine] or [feminine] header".into(),
                        })
                    }
                },
            }
        }
        Lexicon::new(masculine, feminine)
    }

    /// A general English wordlist of gender-coded stems as used in
    /// job-advert wording research.
    pub fn builtin_english() -> Self {
        Lexicon::parse(BUILTIN_EN).expect("bundled lexicon is valid")
    }

    pub fn masculine(&self) -> &BTreeSet<String> {
        &self.masculine
    }

    pub fn feminine(&self) -> &BTreeSet<String> {
        &self.feminine
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LexiconScore {
    pub masculine: i64,
    pub feminine: i64,
    /// `masculine - feminine`
    pub imbalance: i64,
}

/// Counts gender-coded tokens. Text is lowercased and split on anything that
/// is not alphanumeric; each token counts at most once, checking masculine
/// stems before feminine ones.
pub fn lexicon_imbalance(text: &str, lexicon: &Lexicon) -> LexiconScore {
    let lowered = text.to_lowercase();
    let (mut m, mut f) = (0i64, 0i64);
    for token in lowered.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        if lexicon.masculine.iter().any(|s| token.starts_with(s.as_str())) {
            m += 1;
        } else if lexicon.feminine.iter().any(|s| token.starts_with(s.as_str())) {
            f += 1;
        }
    }
    LexiconScore {
        masculine: m,
        feminine: f,
        imbalance: m - f,
    }
}

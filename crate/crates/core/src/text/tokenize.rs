/// Lowercases, splits on whitespace, and splits every non-alphanumeric
/// character off as its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in lower.chars() {
        if ch.is_alphanumeric() {
            word.push(ch);
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            tokens.push(ch.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let parts: Vec<&str> = tokens.iter().map(|t| t.as_ref()).collect();
    parts.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sentence_with_period() {
        assert_eq!(
            tokenize("This is a picture of a store."),
            vec!["this", "is", "a", "picture", "of", "a", "store", "."]
        );
    }

    #[test]
    fn empty_and_whitespace() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \n\t").is_empty());
    }

    #[test]
    fn apostrophe_splits() {
        assert_eq!(tokenize("Don't stop"), vec!["don", "'", "t", "stop"]);
    }

    #[test]
    fn repeated_punctuation_is_separate() {
        assert_eq!(tokenize("wow!!"), vec!["wow", "!", "!"]);
    }

    proptest! {
        #[test]
        fn detokenize_round_trip_is_idempotent(s in "\\PC{0,60}") {
            let once = tokenize(&s);
            let twice = tokenize(&detokenize(&once));
            prop_assert_eq!(once, twice);
        }
    }
}

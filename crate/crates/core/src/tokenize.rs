//! Shared tokenizer: one token per CJK character, lower-cased runs of other
//! alphanumerics, punctuation and whitespace discarded.

/// True for characters that are tokenized one per token.
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2FA1F
        | 0x3040..=0x30FF
        | 0xAC00..=0xD7AF)
}

pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if is_cjk(c) {
            flush(&mut word, &mut out);
            out.push(c.to_string());
        } else if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
        } else {
            flush(&mut word, &mut out);
        }
    }
    flush(&mut word, &mut out);
    out
}

fn flush(word: &mut String, out: &mut Vec<String>) {
    if !word.is_empty() {
        out.push(std::mem::take(word));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_script() {
        assert_eq!(
            tokenize("Can I see the lipstick? 看看口红"),
            ["can", "i", "see", "the", "lipstick", "看", "看", "口", "红"]
        );
    }

    #[test]
    fn punctuation_splits_words() {
        assert_eq!(tokenize("S/M/L/XL"), ["s", "m", "l", "xl"]);
        assert_eq!(tokenize("T恤什么尺码？"), ["t", "恤", "什", "么", "尺", "码"]);
        assert!(tokenize("  ,. ").is_empty());
    }
}

pub const DEFAULT_MAX_RUN: usize = 20;
/// Longest token period checked for looping output.
pub const MAX_PERIOD: usize = 20;

/// True when generation looks stuck in a loop: the same non-blank line
/// repeated `max_run` times in a row (blank lines ignored), or a block of up to
/// [`MAX_PERIOD`] whitespace tokens repeated back to back `max_run` times.
pub fn detect_repetition(text: &str, max_run: usize) -> bool {
    let max_run = max_run.max(2);
    let mut prev: Option<&str> = None;
    let mut run = 0;
    for line in text.lines().map(str::trim_end).filter(|l| !l.trim().is_empty()) {
        if prev == Some(line) {
            run += 1;
        } else {
            prev = Some(line);
            run = 1;
        }
        if run >= max_run {
            return true;
        }
    }

    let tokens: Vec<&str> = text.split_whitespace().collect();
    for period in 1..=MAX_PERIOD {
        // `max_run` copies of a `period`-token block means
        // period * (max_run - 1) consecutive positions with t[j] == t[j + period].
        let need = period * (max_run - 1);
        if tokens.len() < need + period {
            break;
        }
        let mut streak = 0;
        for j in 0..tokens.len() - period {
            if tokens[j] == tokens[j + period] {
                streak += 1;
                if streak >= need {
                    return true;
                }
            } else {
                streak = 0;
            }
        }
    }
    false
}

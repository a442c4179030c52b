//! Evaluation of stego output: bits per word, BLEU and perplexity.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hash;

use thiserror::Error;

use crate::lm::{GenerationContext, LmError, Provider};
use crate::tokenizer::{BpeModel, TokenId, EOS_ID};

/// Stand-in for a zero n-gram precision so the geometric mean stays defined.
pub const BLEU_EPSILON: f64 = 1e-9;
pub const DEFAULT_MAX_N: usize = 4;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cover text has no tokens")]
    EmptyCover,
    #[error("BLEU needs non-empty candidate and reference")]
    EmptyInput,
    #[error("token {token} at position {position} has zero probability")]
    ZeroProbabilityToken { position: usize, token: TokenId },
    #[error(transparent)]
    Provider(#[from] LmError),
}

/// Embedded bits per cover token (`<eos>` not counted).
pub fn bpw(embedded_bits: usize, cover: &str, tokenizer: &BpeModel) -> Result<f64, MetricsError> {
    let n = tokenizer.encode_lossy(cover).len();
    if n == 0 {
        return Err(MetricsError::EmptyCover);
    }
    Ok(embedded_bits as f64 / n as f64)
}

/// Sentence BLEU of `candidate` against `reference` over tokenizer tokens.
pub fn bleu(
    candidate: &str,
    reference: &str,
    tokenizer: &BpeModel,
    max_n: usize,
) -> Result<f64, MetricsError> {
    bleu_tokens(
        &tokenizer.encode_lossy(candidate),
        &tokenizer.encode_lossy(reference),
        max_n,
    )
}

/// BLEU over token sequences.
///
/// Geometric mean of clipped n-gram precisions for `n = 1..=N` times the
/// brevity penalty `min(1, exp(1 - r/c))`. `N` is `max_n` capped at the
/// candidate length, so orders the candidate cannot contain are left out
/// instead of zeroing the score. A precision with no matches counts as
/// [`BLEU_EPSILON`].
pub fn bleu_tokens<T: Eq + Hash + Clone>(
    candidate: &[T],
    reference: &[T],
    max_n: usize,
) -> Result<f64, MetricsError> {
    if candidate.is_empty() || reference.is_empty() || max_n == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let orders = max_n.min(candidate.len());
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let cand = ngram_counts(candidate, n);
        let refc = ngram_counts(reference, n);
        let matched: usize = cand
            .iter()
            .map(|(g, &c)| c.min(refc.get(g).copied().unwrap_or(0)))
            .sum();
        let total = candidate.len() + 1 - n;
        let precision = if matched == 0 {
            BLEU_EPSILON
        } else {
            matched as f64 / total as f64
        };
        log_sum += precision.ln();
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let brevity = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    Ok(brevity * (log_sum / orders as f64).exp())
}

fn ngram_counts<T: Eq + Hash + Clone>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_default() += 1;
    }
    counts
}

/// `exp(-(1/n) * sum(ln p(token_i | prefix)))` with `<eos>` as the final event.
pub fn perplexity<P: Provider + ?Sized>(
    text: &str,
    provider: &mut P,
    tokenizer: &BpeModel,
) -> Result<f64, MetricsError> {
    let mut tokens = tokenizer.encode_lossy(text);
    tokens.push(EOS_ID);
    perplexity_tokens(&tokens, "", provider)
}

/// Perplexity of an explicit token sequence (include `<eos>` yourself).
pub fn perplexity_tokens<P: Provider + ?Sized>(
    tokens: &[TokenId],
    source: &str,
    provider: &mut P,
) -> Result<f64, MetricsError> {
    let mut nll = 0.0;
    for (i, &token) in tokens.iter().enumerate() {
        let dist = provider.next_distribution(&GenerationContext::new(source, &tokens[..i]))?;
        let p = dist.prob(token);
        if p <= 0.0 {
            return Err(MetricsError::ZeroProbabilityToken { position: i, token });
        }
        nll -= p.ln();
    }
    Ok((nll / tokens.len().max(1) as f64).exp())
}

/// One-sided sign test: probability of at least `wins` successes in
/// `wins + losses` fair coin flips.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    let mut ln_fact = vec![0.0f64; n + 1];
    for i in 1..=n {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let ln_half_n = n as f64 * 0.5f64.ln();
    (wins..=n)
        .map(|k| (ln_fact[n] - ln_fact[k] - ln_fact[n - k] + ln_half_n).exp())
        .sum::<f64>()
        .min(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub cover_tokens: usize,
    pub stego_tokens: usize,
    pub embedded_bits: usize,
    pub bpw: f64,
    pub bleu: f64,
    pub ppl: f64,
}

pub const REPORT_HEADER: &str = "id\tcover_tokens\tstego_tokens\tembedded_bits\tbpw\tbleu\tppl";

/// Scores one stego text against its cover. `stego_tokens` excludes `<eos>`.
pub fn evaluate<P: Provider + ?Sized>(
    cover: &str,
    stego: &str,
    embedded_bits: usize,
    tokenizer: &BpeModel,
    provider: &mut P,
) -> Result<EvalReport, MetricsError> {
    let cover_tokens = tokenizer.encode_lossy(cover).len();
    let stego_tokens = tokenizer.encode_lossy(stego).len();
    Ok(EvalReport {
        cover_tokens,
        stego_tokens,
        embedded_bits,
        bpw: bpw(embedded_bits, cover, tokenizer)?,
        bleu: bleu(stego, cover, tokenizer, DEFAULT_MAX_N)?,
        ppl: perplexity(stego, provider, tokenizer)?,
    })
}

/// Tab-separated report: header, one row per text, then a `mean` row.
pub fn report_tsv(rows: &[EvalReport]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
            r.cover_tokens, r.stego_tokens, r.embedded_bits, r.bpw, r.bleu, r.ppl
        );
    }
    let n = rows.len().max(1) as f64;
    let mean = |f: &dyn Fn(&EvalReport) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let _ = writeln!(
        out,
        "mean\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
        mean(&|r| r.cover_tokens as f64),
        mean(&|r| r.stego_tokens as f64),
        mean(&|r| r.embedded_bits as f64),
        mean(&|r| r.bpw),
        mean(&|r| r.bleu),
        mean(&|r| r.ppl),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{Distribution, ScriptedProvider, UniformProvider};

    fn words() -> BpeModel {
        BpeModel::from_words(&["the", "cat", "sat", "on", "mat", "a", "dog", "ran"])
    }

    #[test]
    fn bpw_definition() {
        let tok = words();
        assert_eq!(bpw(0, "the cat", &tok).unwrap(), 0.0);
        let twenty = vec!["cat"; 20].join(" ");
        assert_eq!(bpw(10, &twenty, &tok).unwrap(), 0.5);
        assert_eq!(
            bpw(20, &twenty, &tok).unwrap(),
            2.0 * bpw(10, &twenty, &tok).unwrap()
        );
        assert!(matches!(bpw(1, "  ", &tok), Err(MetricsError::EmptyCover)));
    }

    #[test]
    fn bleu_identity_and_disjoint() {
        let tok = words();
        assert_eq!(
            bleu("the cat sat on the mat", "the cat sat on the mat", &tok, 4).unwrap(),
            1.0
        );
        assert_eq!(bleu("cat", "cat", &tok, 4).unwrap(), 1.0);
        assert!(bleu("dog ran", "the cat sat", &tok, 4).unwrap() < 1e-8);
        assert!(matches!(
            bleu("", "cat", &tok, 4),
            Err(MetricsError::EmptyInput)
        ));
    }

    #[test]
    fn bleu_is_directional() {
        let tok = words();
        let a = bleu("the cat", "the cat sat on the mat", &tok, 4).unwrap();
        let b = bleu("the cat sat on the mat", "the cat", &tok, 4).unwrap();
        assert!(b < a);
        // Candidate shorter than reference: brevity penalty exp(1 - 6/2), precisions 1.
        assert!((a - (1.0f64 - 3.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn uniform_perplexity_is_vocab_size() {
        let tok = words();
        let m = tok.vocab_size();
        let ppl = perplexity("the cat sat", &mut UniformProvider(m), &tok).unwrap();
        assert!((ppl - m as f64).abs() / (m as f64) < 1e-9);
    }

    #[test]
    fn one_hot_on_own_output_is_one() {
        let tok = words();
        let m = tok.vocab_size();
        let seq = [tok.id_of("the").unwrap(), tok.id_of("cat").unwrap(), EOS_ID];
        let mut p = ScriptedProvider::spelling(m, &seq);
        assert_eq!(perplexity("the cat", &mut p, &tok).unwrap(), 1.0);
    }

    #[test]
    fn zero_probability_is_reported() {
        let tok = words();
        let m = tok.vocab_size();
        let mut p = ScriptedProvider::spelling(m, &[EOS_ID, EOS_ID]);
        assert!(matches!(
            perplexity("cat", &mut p, &tok),
            Err(MetricsError::ZeroProbabilityToken { position: 0, .. })
        ));
    }

    #[test]
    fn more_certainty_never_raises_perplexity() {
        let tok = words();
        let m = tok.vocab_size();
        let cat = tok.id_of("cat").unwrap();
        let spread = |p_cat: f64| {
            let mut probs = vec![(1.0 - p_cat) / (m - 1) as f64; m];
            probs[cat as usize] = p_cat;
            Distribution::new(probs).unwrap()
        };
        let mut last = f64::INFINITY;
        for p_cat in [0.1, 0.3, 0.5, 0.9] {
            let mut provider = ScriptedProvider::new(vec![spread(p_cat), spread(0.5)]);
            let ppl = perplexity("cat", &mut provider, &tok).unwrap();
            assert!(ppl <= last);
            last = ppl;
        }
    }

    #[test]
    fn sign_test_values() {
        assert!((sign_test(1, 0) - 0.5).abs() < 1e-12);
        assert!((sign_test(10, 0) - 1.0 / 1024.0).abs() < 1e-12);
        assert!((sign_test(0, 5) - 1.0).abs() < 1e-12);
        // P(X >= 8 | n = 10) = (45 + 10 + 1) / 1024
        assert!((sign_test(8, 2) - 56.0 / 1024.0).abs() < 1e-12);
    }

    #[test]
    fn report_layout() {
        let rows = vec![
            EvalReport {
                cover_tokens: 4,
                stego_tokens: 5,
                embedded_bits: 2,
                bpw: 0.5,
                bleu: 1.0,
                ppl: 3.0,
            },
            EvalReport {
                cover_tokens: 6,
                stego_tokens: 7,
                embedded_bits: 0,
                bpw: 0.0,
                bleu: 0.5,
                ppl: 5.0,
            },
        ];
        let tsv = report_tsv(&rows);
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], REPORT_HEADER);
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[3],
            "mean\t5.000000\t6.000000\t1.000000\t0.250000\t0.750000\t4.000000"
        );
    }
}

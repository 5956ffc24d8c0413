//! Sample, file-vote and sliding-window-vote accuracy.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaggedPrediction {
    pub file: usize,
    pub truth: usize,
    pub predicted: usize,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub samples: usize,
    pub files: usize,
    pub degenerate: usize,
    pub sa: f64,
    pub fva: f64,
    pub nva: f64,
    pub nva_window: usize,
}

/// Majority class of `votes`; ties go to the tied class voted most recently.
pub fn majority(votes: &[usize]) -> Option<usize> {
    let classes = votes.iter().copied().max()? + 1;
    let mut count = vec![0usize; classes];
    let mut last = vec![0usize; classes];
    for (i, &v) in votes.iter().enumerate() {
        count[v] += 1;
        last[v] = i;
    }
    let best = *count.iter().max()?;
    (0..classes).filter(|&c| count[c] == best).max_by_key(|&c| last[c])
}

/// Predictions of one file must be contiguous and in stream order. The
/// sliding window is truncated at the start of each file.
pub fn evaluate(preds: &[TaggedPrediction], nva_window: usize) -> Result<EvalReport> {
    if preds.is_empty() {
        return Err(Error::Precondition("no predictions to evaluate".into()));
    }
    if nva_window == 0 {
        return Err(Error::Config("NVA window must be >= 1".into()));
    }
    let correct = preds.iter().filter(|p| p.predicted == p.truth).count();
    let mut files = 0usize;
    let mut files_correct = 0usize;
    let mut nva_correct = 0usize;
    for group in preds.chunk_by(|a, b| a.file == b.file) {
        files += 1;
        let truth = group[0].truth;
        if group.iter().any(|p| p.truth != truth) {
            return Err(Error::Validation(format!("file {} has mixed ground truth", group[0].file)));
        }
        let votes: Vec<usize> = group.iter().map(|p| p.predicted).collect();
        if majority(&votes) == Some(truth) {
            files_correct += 1;
        }
        for i in 0..votes.len() {
            let lo = (i + 1).saturating_sub(nva_window);
            if majority(&votes[lo..=i]) == Some(truth) {
                nva_correct += 1;
            }
        }
    }
    let seen: std::collections::BTreeSet<usize> = preds.iter().map(|p| p.file).collect();
    if seen.len() != files {
        return Err(Error::Validation("predictions of a file are not contiguous".into()));
    }
    let n = preds.len() as f64;
    Ok(EvalReport {
        samples: preds.len(),
        files,
        degenerate: preds.iter().filter(|p| p.degenerate).count(),
        sa: correct as f64 / n,
        fva: files_correct as f64 / files as f64,
        nva: nva_correct as f64 / n,
        nva_window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn file(id: usize, truth: usize, predicted: &[usize]) -> Vec<TaggedPrediction> {
        predicted
            .iter()
            .map(|&p| TaggedPrediction {
                file: id,
                truth,
                predicted: p,
                degenerate: false,
            })
            .collect()
    }

    #[test]
    fn hand_vote() {
        let r = evaluate(&file(0, 0, &[0, 0, 1]), 3).unwrap();
        assert!((r.sa - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.fva, 1.0);
        // windows: [0], [0,0], [0,0,1]
        assert_eq!(r.nva, 1.0);
    }

    #[test]
    fn all_correct_and_all_wrong() {
        let r = evaluate(&file(4, 2, &[2; 7]), 3).unwrap();
        assert_eq!((r.sa, r.fva, r.nva), (1.0, 1.0, 1.0));
        let r = evaluate(&file(4, 2, &[1; 7]), 3).unwrap();
        assert_eq!((r.sa, r.fva, r.nva), (0.0, 0.0, 0.0));
    }

    #[test]
    fn ties_go_to_most_recent() {
        assert_eq!(majority(&[0, 1]), Some(1));
        assert_eq!(majority(&[1, 0]), Some(0));
        assert_eq!(majority(&[2, 2, 0, 0, 1]), Some(0));
        assert_eq!(majority(&[]), None);
        let r = evaluate(&file(0, 1, &[1, 0]), 2).unwrap();
        assert_eq!(r.fva, 0.0);
        assert_eq!(r.nva, 0.5);
    }

    #[test]
    fn random_labels_sa_near_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let preds: Vec<_> = (0..1000)
            .map(|i| TaggedPrediction {
                file: i / 50,
                truth: (i / 50) % 11,
                predicted: rng.random_range(0..11),
                degenerate: false,
            })
            .collect();
        let r = evaluate(&preds, 5).unwrap();
        assert!((r.sa - 1.0 / 11.0).abs() <= 0.03, "sa = {}", r.sa);
        assert_eq!(r.files, 20);
    }

    #[test]
    fn errors() {
        assert!(evaluate(&[], 3).is_err());
        let mut p = file(0, 0, &[0]);
        p.extend(file(1, 0, &[0]));
        p.extend(file(0, 0, &[0]));
        assert!(evaluate(&p, 3).is_err());
    }
}

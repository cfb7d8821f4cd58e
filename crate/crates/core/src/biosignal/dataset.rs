//! Window labeling, class balancing and record-level dataset splits.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::biosignal::record::{Channel, Label, LabeledWindow, SignalRecord, WindowOrigin, WINDOW_LEN, WINDOW_OVERLAP};
use crate::error::{Error, Result};
use crate::preprocess::segment_starts;
use crate::rng::component_rng;

/// Fraction of a window's samples that must be ictal for a seizure label.
pub const SEIZURE_OVERLAP_THRESHOLD: f64 = 0.5;

/// Anything that carries a class label and the record it was cut from.
pub trait Windowed {
    fn label(&self) -> Label;
    fn record_id(&self) -> &str;
}

impl Windowed for LabeledWindow {
    fn label(&self) -> Label {
        self.label
    }

    fn record_id(&self) -> &str {
        &self.origin.record
    }
}

/// Labels `[start, start + len)`: seizure iff at least half of its samples
/// fall inside an annotated interval.
pub fn label_window(record: &SignalRecord, start: usize, len: usize) -> Result<Label> {
    label_window_with(record, start, len, SEIZURE_OVERLAP_THRESHOLD)
}

pub fn label_window_with(record: &SignalRecord, start: usize, len: usize, threshold: f64) -> Result<Label> {
    let end = start.checked_add(len).filter(|&e| e <= record.len() && len > 0).ok_or(Error::WindowOutOfRange {
        start,
        end: start.saturating_add(len),
        len: record.len(),
    })?;
    let inside: usize = record.annotations.iter().map(|iv| iv.overlap(start, end)).sum();
    Ok(if inside as f64 >= threshold * len as f64 {
        Label::Seizure
    } else {
        Label::NonSeizure
    })
}

/// Cuts every full window out of `record` and labels it.
pub fn windows_from_record(record: &SignalRecord) -> Result<Vec<LabeledWindow>> {
    let starts = segment_starts(record.len(), WINDOW_LEN, WINDOW_OVERLAP)?;
    starts
        .into_iter()
        .map(|start| {
            let label = label_window(record, start, WINDOW_LEN)?;
            let channels = record
                .channels
                .iter()
                .map(|c| Channel::new(c.name.clone(), c.samples[start..start + WINDOW_LEN].to_vec()))
                .collect();
            Ok(LabeledWindow {
                channels,
                label,
                origin: WindowOrigin {
                    record: record.patient_id.clone(),
                    start,
                },
            })
        })
        .collect()
}

/// Keeps every minority-class item and a uniform random subset of the
/// majority class of the same size. Input order is preserved.
pub fn undersample<T: Windowed + Clone>(items: &[T], seed: u64) -> Result<Vec<T>> {
    let keep = undersample_indices(items, seed)?;
    Ok(keep.into_iter().map(|i| items[i].clone()).collect())
}

pub fn undersample_indices<T: Windowed>(items: &[T], seed: u64) -> Result<Vec<usize>> {
    let (seizure, other): (Vec<usize>, Vec<usize>) = (0..items.len()).partition(|&i| items[i].label().is_seizure());
    if seizure.is_empty() {
        return Err(Error::EmptyClass("seizure"));
    }
    if other.is_empty() {
        return Err(Error::EmptyClass("non-seizure"));
    }
    let (minority, majority) = if seizure.len() <= other.len() {
        (seizure, other)
    } else {
        (other, seizure)
    };
    let mut rng = component_rng(seed, "undersample");
    let mut picked: Vec<usize> = index::sample(&mut rng, majority.len(), minority.len())
        .into_iter()
        .map(|k| majority[k])
        .collect();
    picked.extend_from_slice(&minority);
    picked.sort_unstable();
    Ok(picked)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPolicy {
    pub val_per_class: usize,
    pub test_per_class: usize,
}

impl SplitPolicy {
    /// Validation 400/400, test 784/784.
    pub const PUBLISHED: SplitPolicy = SplitPolicy {
        val_per_class: 400,
        test_per_class: 784,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
}

impl<T> DatasetSplit<T> {
    pub fn map<U>(self, mut f: impl FnMut(T) -> Result<U>) -> Result<DatasetSplit<U>> {
        Ok(DatasetSplit {
            train: self.train.into_iter().map(&mut f).collect::<Result<_>>()?,
            validation: self.validation.into_iter().map(&mut f).collect::<Result<_>>()?,
            test: self.test.into_iter().map(&mut f).collect::<Result<_>>()?,
        })
    }
}

fn class_counts<T: Windowed>(items: &[&T]) -> (usize, usize) {
    let s = items.iter().filter(|w| w.label().is_seizure()).count();
    (s, items.len() - s)
}

/// Takes exactly `n` windows of each class from `pool` at random.
fn balanced_draw<T: Windowed + Clone>(pool: &[&T], n: usize, rng: &mut crate::rng::Rng) -> Vec<T> {
    let mut out = Vec::with_capacity(2 * n);
    for want in [Label::Seizure, Label::NonSeizure] {
        let class: Vec<&&T> = pool.iter().filter(|w| w.label() == want).collect();
        let mut idx: Vec<usize> = index::sample(rng, class.len(), n).into_vec();
        idx.sort_unstable();
        out.extend(idx.into_iter().map(|i| (*class[i]).clone()));
    }
    out
}

/// Splits by whole records so train, validation and test never share an
/// event. Test and validation are drawn exactly class-balanced; train keeps
/// the remaining records unbalanced (trainers undersample it).
pub fn split_dataset<T: Windowed + Clone>(windows: &[T], policy: SplitPolicy, seed: u64) -> Result<DatasetSplit<T>> {
    let mut by_record: BTreeMap<&str, Vec<&T>> = BTreeMap::new();
    for w in windows {
        by_record.entry(w.record_id()).or_default().push(w);
    }
    let total_seizure = windows.iter().filter(|w| w.label().is_seizure()).count();
    let total_other = windows.len() - total_seizure;
    let needed = policy.val_per_class + policy.test_per_class;
    if total_seizure < needed {
        return Err(Error::InsufficientWindows {
            class: "seizure",
            purpose: "validation and test",
            needed,
            available: total_seizure,
        });
    }
    if total_other < needed {
        return Err(Error::InsufficientWindows {
            class: "non-seizure",
            purpose: "validation and test",
            needed,
            available: total_other,
        });
    }

    let mut rng = component_rng(seed, "split");
    let mut records: Vec<&str> = by_record.keys().copied().collect();
    records.shuffle(&mut rng);

    let mut cursor = 0;
    let mut take_pool = |quota: usize, purpose: &'static str| -> Result<Vec<&T>> {
        let mut pool: Vec<&T> = Vec::new();
        while {
            let (s, o) = class_counts(&pool);
            s < quota || o < quota
        } {
            let Some(rec) = records.get(cursor) else {
                let (s, o) = class_counts(&pool);
                let (class, available) = if s < quota { ("seizure", s) } else { ("non-seizure", o) };
                return Err(Error::InsufficientWindows {
                    class,
                    purpose,
                    needed: quota,
                    available,
                });
            };
            pool.extend_from_slice(&by_record[rec]);
            cursor += 1;
        }
        Ok(pool)
    };
    let test_pool = take_pool(policy.test_per_class, "test")?;
    let val_pool = take_pool(policy.val_per_class, "validation")?;
    let train: Vec<T> = records[cursor..]
        .iter()
        .flat_map(|r| by_record[r].iter().map(|w| (*w).clone()))
        .collect();
    if train.is_empty() {
        return Err(Error::InsufficientWindows {
            class: "any",
            purpose: "training",
            needed: 1,
            available: 0,
        });
    }
    let test = balanced_draw(&test_pool, policy.test_per_class, &mut rng);
    let validation = balanced_draw(&val_pool, policy.val_per_class, &mut rng);
    Ok(DatasetSplit { train, validation, test })
}

/// Record ids present in a collection.
pub fn record_ids<T: Windowed>(items: &[T]) -> BTreeSet<String> {
    items.iter().map(|w| w.record_id().to_owned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biosignal::record::{ChannelId, SeizureInterval, SAMPLE_RATE};
    use proptest::prelude::*;

    fn record(len: usize, anns: Vec<SeizureInterval>) -> SignalRecord {
        SignalRecord::new(
            "r",
            SAMPLE_RATE,
            vec![Channel::new(ChannelId::Ecg.name(), vec![0.0; len])],
            anns,
        )
        .unwrap()
    }

    #[derive(Clone, Debug, PartialEq)]
    struct Item {
        label: Label,
        record: String,
        id: usize,
    }

    impl Windowed for Item {
        fn label(&self) -> Label {
            self.label
        }
        fn record_id(&self) -> &str {
            &self.record
        }
    }

    fn brute_label(anns: &[SeizureInterval], start: usize, len: usize) -> Label {
        let inside = (start..start + len)
            .filter(|&i| anns.iter().any(|a| a.start_sample <= i && i < a.end_sample))
            .count();
        if 2 * inside >= len {
            Label::Seizure
        } else {
            Label::NonSeizure
        }
    }

    #[test]
    fn window_inside_and_outside() {
        let rec = record(4000, vec![SeizureInterval::new(1000, 2000).unwrap()]);
        assert_eq!(label_window(&rec, 1100, 768).unwrap(), Label::Seizure);
        assert_eq!(label_window(&rec, 2000, 768).unwrap(), Label::NonSeizure);
        assert!(matches!(label_window(&rec, 3500, 768), Err(Error::WindowOutOfRange { .. })));
    }

    #[test]
    fn exactly_half_overlap_is_seizure() {
        // [0, 768) with the last 384 samples inside [384, 2000).
        let rec = record(4000, vec![SeizureInterval::new(384, 2000).unwrap()]);
        assert_eq!(brute_label(&rec.annotations, 0, 768), Label::Seizure);
        assert_eq!(label_window(&rec, 0, 768).unwrap(), Label::Seizure);
        let rec = record(4000, vec![SeizureInterval::new(385, 2000).unwrap()]);
        assert_eq!(label_window(&rec, 0, 768).unwrap(), Label::NonSeizure);
    }

    proptest! {
        #[test]
        fn labels_match_brute_force(
            len in 800usize..6000,
            raw in proptest::collection::vec((0usize..6000, 1usize..1500), 0..4),
        ) {
            let mut anns: Vec<SeizureInterval> = Vec::new();
            let mut sorted = raw.clone();
            sorted.sort();
            for (s, l) in sorted {
                let e = (s + l).min(len);
                if s >= e || anns.last().is_some_and(|p| p.end_sample > s) { continue; }
                anns.push(SeizureInterval::new(s, e).unwrap());
            }
            let rec = record(len, anns.clone());
            for w in windows_from_record(&rec).unwrap() {
                prop_assert_eq!(w.label, brute_label(&anns, w.origin.start, 768));
            }
        }

        #[test]
        fn undersample_is_balanced_subset(n_s in 1usize..40, n_o in 1usize..40, seed in any::<u64>()) {
            let items: Vec<Item> = (0..n_s + n_o).map(|id| Item {
                label: if id < n_s { Label::Seizure } else { Label::NonSeizure },
                record: "r".into(),
                id,
            }).collect();
            let out = undersample(&items, seed).unwrap();
            let s = out.iter().filter(|i| i.label.is_seizure()).count();
            prop_assert_eq!(s, n_s.min(n_o));
            prop_assert_eq!(out.len() - s, n_s.min(n_o));
            for o in &out { prop_assert!(items.contains(o)); }
        }
    }

    #[test]
    fn undersample_published_counts() {
        let items: Vec<(Label, u32)> = (0..6_332u32)
            .map(|i| (Label::Seizure, i))
            .chain((0..5_760_551u32).map(|i| (Label::NonSeizure, i)))
            .collect();
        struct L<'a>(&'a (Label, u32));
        impl Windowed for L<'_> {
            fn label(&self) -> Label {
                self.0 .0
            }
            fn record_id(&self) -> &str {
                ""
            }
        }
        let wrapped: Vec<L> = items.iter().map(L).collect();
        let keep = undersample_indices(&wrapped, 3).unwrap();
        let s = keep.iter().filter(|&&i| items[i].0.is_seizure()).count();
        assert_eq!(s, 6_332);
        assert_eq!(keep.len(), 2 * 6_332);
        assert_eq!(keep, undersample_indices(&wrapped, 3).unwrap());
    }

    #[test]
    fn undersample_balanced_input_is_identity() {
        let items: Vec<Item> = (0..20)
            .map(|id| Item {
                label: if id % 2 == 0 { Label::Seizure } else { Label::NonSeizure },
                record: "r".into(),
                id,
            })
            .collect();
        assert_eq!(undersample(&items, 9).unwrap(), items);
    }

    #[test]
    fn undersample_needs_both_classes() {
        let items = vec![Item {
            label: Label::Seizure,
            record: "r".into(),
            id: 0,
        }];
        assert!(matches!(undersample(&items, 1), Err(Error::EmptyClass("non-seizure"))));
    }

    fn cohort_items(records: usize, per_record: usize) -> Vec<Item> {
        let mut out = Vec::new();
        for r in 0..records {
            for k in 0..per_record {
                out.push(Item {
                    label: if k < per_record / 3 { Label::Seizure } else { Label::NonSeizure },
                    record: format!("rec{r}"),
                    id: out.len(),
                });
            }
        }
        out
    }

    #[test]
    fn published_sized_split() {
        let items = cohort_items(600, 30);
        let split = split_dataset(&items, SplitPolicy::PUBLISHED, 11).unwrap();
        let count = |v: &[Item], l: Label| v.iter().filter(|i| i.label == l).count();
        assert_eq!(count(&split.test, Label::Seizure), 784);
        assert_eq!(count(&split.test, Label::NonSeizure), 784);
        assert_eq!(count(&split.validation, Label::Seizure), 400);
        assert_eq!(count(&split.validation, Label::NonSeizure), 400);
        let train_ids = record_ids(&split.train);
        assert!(train_ids.is_disjoint(&record_ids(&split.test)));
        assert!(train_ids.is_disjoint(&record_ids(&split.validation)));
        assert_eq!(split, split_dataset(&items, SplitPolicy::PUBLISHED, 11).unwrap());
    }

    #[test]
    fn insufficient_windows() {
        let items = cohort_items(10, 30); // 100 seizure windows
        let policy = SplitPolicy {
            val_per_class: 400,
            test_per_class: 0,
        };
        assert!(matches!(
            split_dataset(&items, policy, 1),
            Err(Error::InsufficientWindows { class: "seizure", .. })
        ));
    }
}

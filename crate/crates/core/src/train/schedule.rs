use serde::{Deserialize, Serialize};

/// Learning-rate plateau state carried between epochs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub lr: f64,
    pub best: Option<f64>,
    /// Epoch (1-based) that set `best`.
    pub best_epoch: usize,
    pub epoch: usize,
    /// Epochs in a row without strict improvement over `best`.
    pub since_best: usize,
}

impl ScheduleState {
    pub fn new(lr: f64) -> Self {
        ScheduleState {
            lr,
            best: None,
            best_epoch: 0,
            epoch: 0,
            since_best: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub improved: bool,
    pub halved: bool,
    pub stop: bool,
}

/// Feeds one epoch's validation loss into the schedule. An epoch counts as
/// non-improving unless it beats the best loss so far strictly. Every
/// `plateau` non-improving epochs in a row halve the rate; `stop` of them
/// end training.
pub fn lr_schedule_step(
    state: ScheduleState,
    val_loss: f64,
    plateau: usize,
    stop: usize,
) -> (ScheduleState, Decision) {
    let mut next = state;
    next.epoch += 1;
    let improved = state.best.is_none_or(|b| val_loss < b);
    let mut d = Decision {
        improved,
        halved: false,
        stop: false,
    };
    if improved {
        next.best = Some(val_loss);
        next.best_epoch = next.epoch;
        next.since_best = 0;
        return (next, d);
    }
    next.since_best += 1;
    if next.since_best >= stop {
        d.stop = true;
    } else if next.since_best % plateau == 0 {
        next.lr *= 0.5;
        d.halved = true;
    }
    (next, d)
}

/// Replays a whole validation-loss sequence; returns the state after each
/// epoch with its decision, ending at the first stop.
pub fn replay(
    lr: f64,
    losses: &[f64],
    plateau: usize,
    stop: usize,
) -> Vec<(ScheduleState, Decision)> {
    let mut state = ScheduleState::new(lr);
    let mut out = Vec::new();
    for &l in losses {
        let (s, d) = lr_schedule_step(state, l, plateau, stop);
        state = s;
        out.push((s, d));
        if d.stop {
            break;
        }
    }
    out
}

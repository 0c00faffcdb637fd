//! Contact-aware scheduling decisions: which units a synchronous round
//! should wait for, and whether a satellite should take a model home or sit
//! out its offline phase.

use serde::{Deserialize, Serialize};

use crate::contact::Interval;
use crate::error::{Error, Result};

/// Participation policy of a synchronous round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncParticipation {
    /// Wait for every unit, however long its return takes.
    Full,
    /// Schedule only units that can return promptly: the download must fit
    /// the unit's next window, the upload must land in the remainder of that
    /// window or the one after it, and the projected return must stay within
    /// `round_bound_s` of the round start.
    Greedy,
}

/// Projected execution of one unit: when it would hold the model, finish
/// computing and deliver its update, given transfers of fixed duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitProjection {
    pub download_done_s: f64,
    /// Index into the unit's window list where the download lands.
    pub download_window: usize,
    pub return_s: f64,
    pub return_window: usize,
}

/// Outcome of planning one synchronous round.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncSchedule {
    /// Indices of scheduled units, ascending.
    pub scheduled: Vec<usize>,
    /// Latest projected return among the scheduled units; `None` when some
    /// scheduled unit cannot finish before the horizon.
    pub projected_completion_s: Option<f64>,
}

/// Earliest possible download-compute-upload cycle of one unit starting no
/// earlier than `t_s`. `None` when the windows cannot host it before they
/// run out.
pub fn project_unit(
    windows: &[Interval],
    t_s: f64,
    download_s: f64,
    compute_s: f64,
    upload_s: f64,
) -> Option<UnitProjection> {
    let (download_window, download_done_s) = earliest_fit(windows, 0, t_s, download_s)?;
    let ready = download_done_s + compute_s;
    let (return_window, return_s) = earliest_fit(windows, download_window, ready, upload_s)?;
    Some(UnitProjection {
        download_done_s,
        download_window,
        return_s,
        return_window,
    })
}

/// First window (at or after `from_window`) that can host a transfer of
/// `duration_s` starting no earlier than `t_s`; returns the window index and
/// the completion time.
fn earliest_fit(
    windows: &[Interval],
    from_window: usize,
    t_s: f64,
    duration_s: f64,
) -> Option<(usize, f64)> {
    for (i, w) in windows.iter().enumerate().skip(from_window) {
        let start = t_s.max(w.start_s);
        if start + duration_s <= w.end_s {
            return Some((i, start + duration_s));
        }
    }
    None
}

/// Plans one synchronous round at time `t_s` over per-unit merged windows.
///
/// Under full participation every unit is waited for. The greedy policy
/// schedules exactly the units whose projected cycle returns the update in
/// the download window itself or the window after it, no later than
/// `t_s + round_bound_s`; leaving slow units idle keeps the round short. An
/// empty greedy selection just means "nothing returns promptly from here" —
/// the caller may retry later — while a round where no unit can ever return
/// again is an error.
pub fn schedule_sync_round(
    t_s: f64,
    unit_windows: &[Vec<Interval>],
    download_s: f64,
    compute_s: f64,
    upload_s: f64,
    policy: SyncParticipation,
    round_bound_s: f64,
) -> Result<SyncSchedule> {
    let projections: Vec<Option<UnitProjection>> = unit_windows
        .iter()
        .map(|w| project_unit(w, t_s, download_s, compute_s, upload_s))
        .collect();
    if projections.iter().all(Option::is_none) {
        return Err(Error::HorizonExhausted { horizon_s: t_s });
    }

    let scheduled: Vec<usize> = match policy {
        SyncParticipation::Full => (0..unit_windows.len()).collect(),
        SyncParticipation::Greedy => projections
            .iter()
            .enumerate()
            .filter_map(|(i, p)| {
                let p = p.as_ref()?;
                let prompt =
                    p.return_window <= p.download_window + 1 && p.return_s <= t_s + round_bound_s;
                prompt.then_some(i)
            })
            .collect(),
    };

    let mut completion: Option<f64> = Some(f64::NEG_INFINITY);
    for &i in &scheduled {
        match (&projections[i], completion) {
            (Some(p), Some(c)) => completion = Some(c.max(p.return_s)),
            _ => completion = None,
        }
    }
    if scheduled.is_empty() {
        completion = None;
    }
    Ok(SyncSchedule {
        scheduled,
        projected_completion_s: completion,
    })
}

/// What a satellite should do with the rest of a contact once its delivery
/// work is done.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactDecision {
    /// Fetch the model now and compute through the offline phase.
    DownloadNow,
    /// Skip the fetch: the next contact is long enough to hold the whole
    /// download-compute-upload cycle, so computing offline would only add a
    /// stale update.
    IdleUntilNext,
}

/// Predictive contact rule: idle exactly when a full cycle fits the next
/// window. With no known next window the safe move is to take the model now.
pub fn predictive_schedule(
    next_window: Option<Interval>,
    download_s: f64,
    compute_s: f64,
    upload_s: f64,
) -> ContactDecision {
    match next_window {
        Some(w) if w.duration_s() >= download_s + compute_s + upload_s => {
            ContactDecision::IdleUntilNext
        }
        _ => ContactDecision::DownloadNow,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(start: f64, end: f64) -> Interval {
        Interval {
            start_s: start,
            end_s: end,
        }
    }

    #[test]
    fn always_connected_units_are_all_scheduled() {
        let units = vec![vec![iv(0.0, 86_400.0)]; 3];
        let s = schedule_sync_round(
            100.0,
            &units,
            5.0,
            60.0,
            5.0,
            SyncParticipation::Greedy,
            7200.0,
        )
        .unwrap();
        assert_eq!(s.scheduled, vec![0, 1, 2]);
        // Download ends 105, compute ends 165, upload ends 170.
        assert_eq!(s.projected_completion_s, Some(170.0));
    }

    #[test]
    fn greedy_leaves_slow_returners_idle() {
        // A round starting at t = 10800 s with 30 min compute and short
        // passes. Units 0 and 1 can only return after a multi-hour gap;
        // units 2-4 return within the hour on their next pass pair.
        let t = 10_800.0;
        let units = vec![
            // Remaining sliver of a current pass, then nothing for 8 h.
            vec![iv(10_700.0, 11_000.0), iv(39_600.0, 40_500.0)],
            // Pass just ended; next one far out.
            vec![iv(10_000.0, 10_790.0), iv(38_000.0, 38_900.0)],
            vec![iv(11_000.0, 11_600.0), iv(14_200.0, 14_800.0)],
            vec![iv(11_500.0, 12_000.0), iv(14_400.0, 15_000.0)],
            vec![iv(12_000.0, 12_600.0), iv(14_600.0, 15_200.0)],
        ];
        let s = schedule_sync_round(
            t,
            &units,
            10.0,
            1_800.0,
            10.0,
            SyncParticipation::Greedy,
            7_200.0,
        )
        .unwrap();
        assert_eq!(s.scheduled, vec![2, 3, 4]);
        // Unit 4 returns last: download ends 12010, compute ends 13810,
        // upload lands in [14600, 15200] -> 14610.
        assert_eq!(s.projected_completion_s, Some(14_610.0));
    }

    #[test]
    fn full_participation_waits_for_everyone() {
        let units = vec![
            vec![iv(0.0, 100.0)],
            vec![iv(50_000.0, 50_200.0), iv(60_000.0, 60_200.0)],
        ];
        let s = schedule_sync_round(
            0.0,
            &units,
            5.0,
            60.0,
            5.0,
            SyncParticipation::Full,
            7_200.0,
        )
        .unwrap();
        assert_eq!(s.scheduled, vec![0, 1]);
        // Unit 1 downloads at 50000..50005, computes to 50065, uploads by 50070.
        assert_eq!(s.projected_completion_s, Some(50_070.0));
    }

    #[test]
    fn unit_that_cannot_return_blanks_full_completion() {
        // Second unit has a download window but never an upload slot.
        let units = vec![vec![iv(0.0, 1000.0)], vec![iv(10.0, 30.0)]];
        let s = schedule_sync_round(
            0.0,
            &units,
            5.0,
            600.0,
            5.0,
            SyncParticipation::Full,
            7_200.0,
        )
        .unwrap();
        assert_eq!(s.scheduled, vec![0, 1]);
        assert_eq!(s.projected_completion_s, None);
    }

    #[test]
    fn exhausted_windows_are_an_error() {
        let units = vec![vec![iv(0.0, 100.0)], vec![iv(50.0, 90.0)]];
        let err = schedule_sync_round(
            200.0,
            &units,
            5.0,
            60.0,
            5.0,
            SyncParticipation::Greedy,
            7_200.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::HorizonExhausted { .. }));
    }

    #[test]
    fn empty_greedy_selection_is_not_an_error() {
        // The unit can still return some day, just not promptly.
        let units = vec![vec![iv(100_000.0, 100_050.0), iv(200_000.0, 200_050.0)]];
        let s = schedule_sync_round(
            0.0,
            &units,
            5.0,
            60.0,
            5.0,
            SyncParticipation::Greedy,
            7_200.0,
        )
        .unwrap();
        assert!(s.scheduled.is_empty());
        assert_eq!(s.projected_completion_s, None);
    }

    #[test]
    fn projection_spills_the_upload_into_the_next_window() {
        let windows = vec![iv(0.0, 100.0), iv(500.0, 600.0)];
        let p = project_unit(&windows, 0.0, 10.0, 300.0, 10.0).unwrap();
        assert_eq!(p.download_done_s, 10.0);
        assert_eq!(p.download_window, 0);
        assert_eq!(p.return_window, 1);
        assert_eq!(p.return_s, 510.0);
    }

    #[test]
    fn predictive_rule_idles_iff_the_next_window_fits_a_cycle() {
        assert_eq!(
            predictive_schedule(Some(iv(1000.0, 1070.0)), 5.0, 60.0, 5.0),
            ContactDecision::IdleUntilNext
        );
        assert_eq!(
            predictive_schedule(Some(iv(1000.0, 1069.0)), 5.0, 60.0, 5.0),
            ContactDecision::DownloadNow
        );
        assert_eq!(
            predictive_schedule(None, 5.0, 60.0, 5.0),
            ContactDecision::DownloadNow
        );
    }

    #[test]
    fn zero_compute_idles_whenever_a_next_window_exists() {
        assert_eq!(
            predictive_schedule(Some(iv(10.0, 10.5)), 0.0, 0.0, 0.0),
            ContactDecision::IdleUntilNext
        );
    }
}

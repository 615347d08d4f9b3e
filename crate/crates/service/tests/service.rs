mod common;

use fss_core::adjust::{ComponentKind, DatedValue, Edit};
use fss_core::metrics::Filters;
use fss_service::view::{CreateSessionRequest, SurveyRequest, ViewPayload};
use fss_service::{FileStore, ServiceError, SessionService, Stage, Treatment};

fn create(svc: &SessionService, worker: &str, t: Treatment, at_ms: u64) -> String {
    svc.create_session(&CreateSessionRequest {
        worker_id: worker.into(),
        treatment: Some(t),
        at_ms: Some(at_ms),
    })
    .unwrap()
    .session_id
}

/// Pins every horizon value to `model + share * (truth - model)`.
fn pull_towards_truth(svc: &SessionService, id: &str, k: usize, view: &ViewPayload, share: f64, at_ms: u64) {
    let product = svc.catalog().get(&view.product_id).unwrap().clone();
    let values = view
        .model_forecast
        .iter()
        .zip(&product.task.truth)
        .map(|(m, t)| DatedValue {
            date: m.date,
            value: m.value + share * (t - m.value),
        })
        .collect();
    svc.post_adjustment(id, k, &Edit::Values(values), Some(at_ms)).unwrap();
}

/// Views, optionally adjusts, and signs off all products 20 s apart, then
/// submits the survey at `finish_ms`.
fn complete(svc: &SessionService, id: &str, start_ms: u64, share: Option<f64>, finish_ms: u64) -> fss_service::view::Receipt {
    for k in 0..3 {
        let t0 = start_ms + k as u64 * 30_000;
        let view = svc.get_view(id, k, None, Some(t0)).unwrap();
        if let Some(s) = share {
            pull_towards_truth(svc, id, k, &view, s, t0 + 1_000);
        }
        svc.sign_off(id, k, Some(t0 + 20_000)).unwrap();
    }
    svc.submit_survey(
        id,
        &SurveyRequest {
            scores: [5.0, 6.0, 4.0, 5.0, 3.0],
            comment: "ok".into(),
            at_ms: Some(finish_ms),
        },
    )
    .unwrap()
}

#[test]
fn opaque_view_has_no_components() {
    let svc = common::service();
    let id = create(&svc, "w1", Treatment::O, 0);
    let view = svc.get_view(&id, 0, None, Some(1)).unwrap();
    assert_eq!(view.function_label, "View Details");
    assert_eq!(view.editable, vec![ComponentKind::Values]);
    let json = serde_json::to_value(&view).unwrap();
    let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
    for forbidden in ["decomposition", "adjustable"] {
        assert!(!keys.iter().any(|k| *k == forbidden), "{forbidden} present");
    }
    let text = json.to_string();
    for component in ["\"level\"", "\"weekly\"", "\"yearly\"", "weekly_profile"] {
        assert!(!text.contains(component), "{component} leaked");
    }
    assert_eq!(view.model_forecast.len(), 14);
    assert_eq!(view.forecast, view.model_forecast);
}

#[test]
fn transparent_decomposition_sums_to_totals() {
    let svc = common::service();
    let id = create(&svc, "w1", Treatment::T, 0);
    let view = svc.get_view(&id, 0, None, Some(1)).unwrap();
    assert_eq!(view.function_label, "Explain Values");
    assert!(view.adjustable.is_none());
    let d = view.decomposition.unwrap();
    for p in d.fitted.iter().chain(&d.forecast) {
        assert!((p.level + p.weekly + p.yearly + p.events - p.total).abs() < 1e-9);
    }
    for (p, m) in d.forecast.iter().zip(&view.model_forecast) {
        assert_eq!(p.total, m.value);
    }
}

#[test]
fn adjustable_view_offers_residuals_and_all_edits() {
    let svc = common::service();
    let id = create(&svc, "w1", Treatment::TA, 0);
    let view = svc.get_view(&id, 0, None, Some(1)).unwrap();
    assert_eq!(view.editable.len(), 4);
    let adj = view.adjustable.unwrap();
    assert_eq!((adj.weeks_shown, adj.max_weeks_shown), (38, 38));
    for dow in 0..7 {
        assert_eq!(adj.weekly_residuals.iter().filter(|p| p.slot == dow).count(), 38);
    }
    assert!(adj.yearly_residuals.is_some());
    let small = svc.get_view(&id, 0, Some(5), Some(2)).unwrap().adjustable.unwrap();
    assert_eq!(small.weekly_residuals.len(), 35);
    let clamped = svc.get_view(&id, 0, Some(100), Some(3)).unwrap().adjustable.unwrap();
    assert_eq!(clamped.weeks_shown, 38);
}

#[test]
fn gating_by_treatment() {
    let svc = common::service();
    let t = create(&svc, "wt", Treatment::T, 0);
    let o = create(&svc, "wo", Treatment::O, 0);
    let ta = create(&svc, "wta", Treatment::TA, 0);
    let weekly = Edit::Weekly(vec![1.0; 7]);
    assert!(matches!(
        svc.post_adjustment(&t, 0, &weekly, Some(5)),
        Err(ServiceError::TreatmentViolation { .. })
    ));
    assert!(matches!(
        svc.post_adjustment(&o, 0, &Edit::Reset(ComponentKind::Yearly), Some(5)),
        Err(ServiceError::TreatmentViolation { .. })
    ));
    let view = svc.get_view(&o, 0, None, Some(6)).unwrap();
    let date = view.model_forecast[3].date;
    let resp = svc
        .post_adjustment(&o, 0, &Edit::Values(vec![DatedValue { date, value: 99.0 }]), Some(7))
        .unwrap();
    assert_eq!(resp.forecast[3].value, 99.0);
    assert_eq!(resp.overridden, vec![ComponentKind::Values]);

    let view = svc.get_view(&ta, 0, None, Some(8)).unwrap();
    let level: Vec<DatedValue> = view
        .decomposition
        .as_ref()
        .unwrap()
        .forecast
        .iter()
        .map(|p| DatedValue {
            date: p.date,
            value: p.level + 10.0,
        })
        .collect();
    let resp = svc.post_adjustment(&ta, 0, &Edit::Level(level), Some(9)).unwrap();
    for (a, m) in resp.forecast.iter().zip(&view.model_forecast) {
        assert!((a.value - m.value - 10.0).abs() < 1e-9);
    }
    for id in [&t, &o] {
        assert!(!svc.snapshot(id).unwrap().products[0].state.has_component_overrides());
    }
}

#[test]
fn sign_off_guard_and_sequence() {
    let svc = common::service();
    let id = create(&svc, "w", Treatment::O, 0);
    assert!(matches!(svc.sign_off(&id, 0, Some(50_000)), Err(ServiceError::NotViewed(0))));
    svc.get_view(&id, 0, None, Some(1_000)).unwrap();
    assert!(matches!(
        svc.sign_off(&id, 0, Some(10_000)),
        Err(ServiceError::TooFast { elapsed_ms: 9_000, .. })
    ));
    // The rejected attempt does not reset the viewing timer.
    assert_eq!(svc.sign_off(&id, 0, Some(12_000)).unwrap().next, Stage::Product(1));
    assert!(matches!(svc.sign_off(&id, 0, Some(13_000)), Err(ServiceError::AlreadySignedOff(0))));
    assert!(matches!(svc.get_view(&id, 2, None, Some(13_000)), Err(ServiceError::OutOfOrder { .. })));
    assert!(matches!(svc.get_view(&id, 5, None, Some(13_000)), Err(ServiceError::UnknownProduct(5))));
    let early = SurveyRequest {
        scores: [4.0; 5],
        comment: String::new(),
        at_ms: Some(14_000),
    };
    assert!(matches!(svc.submit_survey(&id, &early), Err(ServiceError::SurveyLocked { signed_off: 1, .. })));
    svc.get_view(&id, 1, None, Some(20_000)).unwrap();
    svc.sign_off(&id, 1, Some(31_000)).unwrap();
    svc.get_view(&id, 2, None, Some(40_000)).unwrap();
    assert_eq!(svc.sign_off(&id, 2, Some(51_000)).unwrap().next, Stage::Survey);
    let bad = SurveyRequest {
        scores: [4.0, 4.0, 0.0, 4.0, 4.0],
        ..early.clone()
    };
    assert!(matches!(svc.submit_survey(&id, &bad), Err(ServiceError::InvalidRequest(_))));
    let receipt = svc.submit_survey(&id, &early).unwrap();
    assert_eq!(receipt.bonus, "0.00");
    assert_eq!(receipt.secret_key.len(), 16);
    assert!(matches!(svc.submit_survey(&id, &early), Err(ServiceError::AlreadyCompleted)));

    let rec = svc.snapshot(&id).unwrap();
    let times: Vec<u64> = rec.products.iter().map(|p| p.signed_off.as_ref().unwrap().at_ms).collect();
    assert!(times.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn receipt_bonus_rules() {
    let svc = common::service();
    let a = create(&svc, "a", Treatment::O, 0);
    let receipt = complete(&svc, &a, 1_000, Some(0.03), 200_000);
    for p in &receipt.products {
        assert!((p.rmae.unwrap() - 0.97).abs() < 1e-12);
        assert_eq!(p.bonus_cents, 60);
    }
    assert_eq!(receipt.bonus, "1.80");
    let b = create(&svc, "b", Treatment::TA, 0);
    assert_eq!(complete(&svc, &b, 1_000, Some(0.5), 200_000).bonus, "3.00");
    let c = create(&svc, "c", Treatment::T, 0);
    assert_eq!(complete(&svc, &c, 1_000, None, 200_000).bonus, "0.00");
}

#[test]
fn duplicates_and_resume() {
    let svc = common::service();
    let first = svc
        .create_session(&CreateSessionRequest {
            worker_id: "dup".into(),
            treatment: Some(Treatment::O),
            at_ms: Some(0),
        })
        .unwrap();
    let again = svc
        .create_session(&CreateSessionRequest {
            worker_id: " dup ".into(),
            treatment: None,
            at_ms: Some(1),
        })
        .unwrap();
    assert!(again.resumed);
    assert_eq!(again.session_id, first.session_id);
    let other = svc.create_session(&CreateSessionRequest {
        worker_id: "dup".into(),
        treatment: Some(Treatment::T),
        at_ms: Some(2),
    });
    assert!(matches!(other, Err(ServiceError::Duplicate { existing: Treatment::O, .. })));
    assert!(svc
        .create_session(&CreateSessionRequest {
            worker_id: "  ".into(),
            treatment: None,
            at_ms: Some(0)
        })
        .is_err());

    let flagging = common::flagging_service();
    create(&flagging, "dup", Treatment::O, 0);
    let second = flagging
        .create_session(&CreateSessionRequest {
            worker_id: "dup".into(),
            treatment: Some(Treatment::T),
            at_ms: Some(0),
        })
        .unwrap();
    assert!(second.duplicate && !second.resumed);
}

#[test]
fn round_robin_assignment_and_product_rotation() {
    let svc = common::service();
    let mut treatments = Vec::new();
    let mut first_products = Vec::new();
    for i in 0..6 {
        let c = svc
            .create_session(&CreateSessionRequest {
                worker_id: format!("rr{i}"),
                treatment: None,
                at_ms: Some(0),
            })
            .unwrap();
        assert_eq!(c.products.len(), 3);
        let mut distinct = c.products.clone();
        distinct.dedup();
        assert_eq!(distinct.len(), 3);
        treatments.push(c.treatment);
        first_products.push(c.products[0].clone());
    }
    assert_eq!(&treatments[..3], &[Treatment::O, Treatment::T, Treatment::TA]);
    assert_eq!(&treatments[3..], &treatments[..3]);
    assert_ne!(first_products[0], first_products[1]);
}

#[test]
fn export_filters() {
    let svc = common::flagging_service();
    let fast = create(&svc, "fast", Treatment::O, 0);
    complete(&svc, &fast, 0, None, 170_000);
    let slow = create(&svc, "slow", Treatment::T, 0);
    complete(&svc, &slow, 0, Some(0.2), 400_000);
    let dup = create(&svc, "slow", Treatment::TA, 0);
    complete(&svc, &dup, 0, None, 400_000);
    let open = create(&svc, "open", Treatment::TA, 0);
    svc.get_view(&open, 0, None, Some(0)).unwrap();

    let raw = svc.export(&Filters::none()).unwrap();
    assert_eq!(raw.len(), 9);
    let filtered = svc.export(&Filters::default()).unwrap();
    assert_eq!(filtered.len(), 3);
    assert!(filtered.iter().all(|r| r.session_id == slow));
    let r = &filtered[0];
    assert_eq!(r.completion_seconds, Some(400.0));
    assert_eq!(r.view_seconds, 20.0);
    assert!((r.av.unwrap() - 0.2).abs() < 1e-12);
    assert!((r.rmae.unwrap() - 0.8).abs() < 1e-12);
    assert_eq!(r.s2, Some(6.0));
    let only_dups = svc
        .export(&Filters {
            drop_duplicates: true,
            min_completion_seconds: None,
        })
        .unwrap();
    assert_eq!(only_dups.len(), 6);
}

#[test]
fn file_store_replays_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let open = |dir: &std::path::Path| {
        common::service_with(common::config(), Box::new(FileStore::open(dir).unwrap()))
    };
    let svc = open(dir.path());
    let a = create(&svc, "a", Treatment::TA, 0);
    complete(&svc, &a, 0, Some(0.1), 300_000);
    let b = create(&svc, "b", Treatment::O, 0);
    svc.get_view(&b, 0, None, Some(5)).unwrap();
    let before = svc.export(&Filters::none()).unwrap();
    let snap_b = svc.snapshot(&b).unwrap();
    drop(svc);

    let svc = open(dir.path());
    assert_eq!(svc.export(&Filters::none()).unwrap(), before);
    assert_eq!(svc.snapshot(&b).unwrap(), snap_b);
    // The open session resumes where it was and ids continue.
    let resumed = svc
        .create_session(&CreateSessionRequest {
            worker_id: "b".into(),
            treatment: None,
            at_ms: Some(6),
        })
        .unwrap();
    assert!(resumed.resumed);
    assert_eq!(create(&svc, "c", Treatment::T, 7), "S000003");
    assert!(matches!(svc.sign_off(&b, 0, Some(6_000)), Err(ServiceError::TooFast { .. })));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 3);
}

mod gating_fuzz {
    use super::*;
    use fss_core::adjust::YearlyPoint;
    use fss_service::SessionEvent;
    use proptest::prelude::*;

    #[derive(Debug, Clone)]
    enum Action {
        Edit(u8, f64),
        SignOff(u64),
    }

    fn arb_action() -> impl Strategy<Value = Action> {
        prop_oneof![
            (0u8..6, -50.0..50.0f64).prop_map(|(k, v)| Action::Edit(k, v)),
            (0u64..25_000).prop_map(Action::SignOff),
        ]
    }

    fn edit_for(kind: u8, v: f64, view: &ViewPayload) -> Edit {
        let dated = |f: &dyn Fn(f64) -> f64| {
            view.model_forecast
                .iter()
                .map(|p| DatedValue { date: p.date, value: f(p.value) })
                .collect()
        };
        match kind {
            0 => Edit::Level(dated(&|m| m + v)),
            1 => Edit::Weekly(vec![v; 7]),
            2 => Edit::Yearly((1..=366).step_by(30).map(|d| YearlyPoint { day_of_year: d, value: v }).collect()),
            3 => Edit::Values(dated(&|_| v.abs())),
            4 => Edit::Reset(ComponentKind::Weekly),
            _ => Edit::ResetAll(true),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn store_never_holds_forbidden_state(t in 0usize..3, actions in proptest::collection::vec(arb_action(), 1..20)) {
            let svc = common::service();
            let treatment = fss_service::treatment::ALL_TREATMENTS[t];
            let id = create(&svc, "fuzz", treatment, 0);
            let mut now = 0;
            let mut k = 0;
            let mut view_start = 0;
            let mut view = svc.get_view(&id, 0, None, Some(now)).unwrap();
            for a in actions {
                if k >= 3 { break; }
                match a {
                    Action::Edit(kind, v) => {
                        now += 100;
                        let edit = edit_for(kind, v, &view);
                        let allowed = treatment.permits(&edit);
                        let res = svc.post_adjustment(&id, k, &edit, Some(now));
                        prop_assert_eq!(res.is_ok(), allowed, "{:?} {:?}", treatment, edit);
                    }
                    Action::SignOff(dt) => {
                        now += dt;
                        let res = svc.sign_off(&id, k, Some(now));
                        if now - view_start < 10_000 {
                            let too_fast = matches!(res, Err(ServiceError::TooFast { .. }));
                            prop_assert!(too_fast);
                        } else {
                            prop_assert!(res.is_ok());
                            k += 1;
                            if k < 3 {
                                view_start = now;
                                view = svc.get_view(&id, k, None, Some(now)).unwrap();
                            }
                        }
                    }
                }
            }
            for (_, events) in svc.store().load_all().unwrap() {
                for e in events {
                    match e {
                        SessionEvent::Adjusted { state, .. } if treatment != Treatment::TA => {
                            prop_assert!(!state.has_component_overrides());
                        }
                        SessionEvent::SignedOff { snapshot, .. } => {
                            prop_assert_eq!(snapshot.final_values.len(), 14);
                        }
                        _ => {}
                    }
                }
            }
        }
    }
}

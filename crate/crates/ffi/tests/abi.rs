use std::ffi::{CStr, CString};
use std::ptr;

use deconflict_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    let text = CStr::from_ptr(s).to_str().unwrap().to_string();
    dc_string_free(s);
    text
}

unsafe fn last_error() -> String {
    CStr::from_ptr(dc_last_error_message()).to_string_lossy().into_owned()
}

#[test]
fn decide_and_explain() {
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(dc_culture_builtin(DcLevel::Easy, &mut c), DcStatus::Ok);
        let (p, o) = (cstr("rank=2,tasked=yes"), cstr("rank=4,tasked=no"));
        let mut w = DcPlayer::Opponent;
        assert_eq!(dc_culture_decide(c, p.as_ptr(), o.as_ptr(), &mut w), DcStatus::Ok);
        assert_eq!(w, DcPlayer::Proponent);
        assert_eq!(dc_culture_decide(c, o.as_ptr(), p.as_ptr(), &mut w), DcStatus::Ok);
        assert_eq!(w, DcPlayer::Opponent);

        let mut out = ptr::null_mut();
        assert_eq!(dc_culture_explain(c, p.as_ptr(), o.as_ptr(), 2, DcPlayer::Proponent, 0, &mut out), DcStatus::Ok);
        assert_eq!(
            take(out),
            "You have right of way: 'tasked overrides rank' defeats the other party's 'higher rank' claim"
        );
        assert_eq!(dc_culture_json(c, &mut out), DcStatus::Ok);
        assert!(take(out).starts_with("{\"name\":\"easy\""));
        dc_culture_free(c);
    }
}

#[test]
fn errors_carry_messages() {
    unsafe {
        let mut c = ptr::null_mut();
        let bad = cstr("culture \"x\"\nproperty p : bool\nrule a \"a\" when self.q = true\n");
        assert_eq!(dc_culture_parse(bad.as_ptr(), &mut c), DcStatus::ParseError);
        assert!(c.is_null());
        assert!(last_error().contains("line 3"), "{}", last_error());

        assert_eq!(dc_culture_parse(ptr::null(), &mut c), DcStatus::NullPointer);
        assert_eq!(dc_culture_builtin(DcLevel::Easy, ptr::null_mut()), DcStatus::NullPointer);

        assert_eq!(dc_culture_builtin(DcLevel::Medium, &mut c), DcStatus::Ok);
        assert_eq!(last_error(), "");
        let mut w = DcPlayer::Opponent;
        let nonsense = cstr("rank=99");
        assert_eq!(dc_culture_decide(c, nonsense.as_ptr(), nonsense.as_ptr(), &mut w), DcStatus::ParseError);
        dc_culture_free(c);
        dc_culture_free(ptr::null_mut());
        dc_session_free(ptr::null_mut());
        dc_string_free(ptr::null_mut());
    }
}

#[test]
fn session_lifecycle() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(dc_session_new(DcLevel::Medium, DcMode::X, 5, &mut s), DcStatus::Ok);
        let mut snap = ptr::null_mut();
        assert_eq!(dc_session_snapshot_json(s, &mut snap), DcStatus::Ok);
        let snap: serde_json::Value = serde_json::from_str(&take(snap)).unwrap();
        assert_eq!(snap["fuel"], 50);
        assert!(snap["hints"].is_array());

        let mut events = ptr::null_mut();
        assert_eq!(dc_session_step(s, DcAction::Wait, 0, &mut events), DcStatus::Ok);
        let events: serde_json::Value = serde_json::from_str(&take(events)).unwrap();
        assert_eq!(events["t"], 1);
        assert_eq!(dc_session_step(s, DcAction::West, 1, ptr::null_mut()), DcStatus::IllegalAction);

        let mut fuel = 0;
        assert_eq!(dc_session_fuel(s, &mut fuel), DcStatus::Ok);
        assert_eq!(fuel, 49 - 5 * events["collisions"].as_array().unwrap().len() as i64);
        let mut done = true;
        assert_eq!(dc_session_is_finished(s, &mut done), DcStatus::Ok);
        assert!(!done);

        let mut log = ptr::null_mut();
        assert_eq!(dc_session_replay_log(s, &mut log), DcStatus::Ok);
        let log = take(log);
        let good = cstr(&log);
        let mut summary = ptr::null_mut();
        assert_eq!(dc_replay_verify(good.as_ptr(), &mut summary), DcStatus::Ok);
        let summary: serde_json::Value = serde_json::from_str(&take(summary)).unwrap();
        assert_eq!(summary["steps"], 1);

        let tampered = cstr(&log.replacen("\"t\":1", "\"t\":2", 1));
        assert_eq!(dc_replay_verify(tampered.as_ptr(), ptr::null_mut()), DcStatus::ReplayInvalid);
        dc_session_free(s);
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(dc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

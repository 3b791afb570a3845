//! C ABI over the deconflict engine.
//!
//! Conventions:
//! - Every fallible function returns a [`DcStatus`] and writes results
//!   through out-pointers. On failure, [`dc_last_error_message`] describes
//!   the error on the calling thread.
//! - Handles ([`DcCulture`], [`DcSession`]) are opaque. Free them with their
//!   `_free` function; passing NULL to a free function is a no-op.
//! - Strings returned by the library are NUL-terminated UTF-8 and must be
//!   released with [`dc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use deconflict::argumentation::ArgumentSet;
use deconflict::culture::{parse_culture, Culture, Level};
use deconflict::dialogue::{decide_outcome, play_dialogue, MoveStrategy, Player};
use deconflict::explanation::{generate_explanation, render_hint, ExplanationKind};
use deconflict::game::{verify_replay, GameError, GameSession, HumanAction, Mode, SessionConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    IllegalAction = 5,
    Finished = 6,
    ReplayInvalid = 7,
    Internal = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcLevel {
    Easy = 0,
    Medium = 1,
    Hard = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcMode {
    N = 0,
    X = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcAction {
    North = 0,
    South = 1,
    West = 2,
    East = 3,
    Wait = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcPlayer {
    Proponent = 0,
    Opponent = 1,
}

/// A parsed, validated culture.
pub struct DcCulture {
    inner: Culture,
}

/// A running game session.
pub struct DcSession {
    inner: GameSession,
}

impl From<DcLevel> for Level {
    fn from(l: DcLevel) -> Self {
        match l {
            DcLevel::Easy => Level::Easy,
            DcLevel::Medium => Level::Medium,
            DcLevel::Hard => Level::Hard,
        }
    }
}

impl From<DcMode> for Mode {
    fn from(m: DcMode) -> Self {
        match m {
            DcMode::N => Mode::N,
            DcMode::X => Mode::X,
        }
    }
}

impl From<DcAction> for HumanAction {
    fn from(a: DcAction) -> Self {
        match a {
            DcAction::North => HumanAction::North,
            DcAction::South => HumanAction::South,
            DcAction::West => HumanAction::West,
            DcAction::East => HumanAction::East,
            DcAction::Wait => HumanAction::Wait,
        }
    }
}

impl From<Player> for DcPlayer {
    fn from(p: Player) -> Self {
        match p {
            Player::Proponent => DcPlayer::Proponent,
            Player::Opponent => DcPlayer::Opponent,
        }
    }
}

impl From<DcPlayer> for Player {
    fn from(p: DcPlayer) -> Self {
        match p {
            DcPlayer::Proponent => Player::Proponent,
            DcPlayer::Opponent => Player::Opponent,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(DcStatus, String);

impl Failure {
    fn new(status: DcStatus, message: impl Into<String>) -> Self {
        Failure(status, message.into())
    }
}

type FfiResult = Result<(), Failure>;

/// Runs `f`, records its error and turns panics into [`DcStatus::Panic`].
fn guard(f: impl FnOnce() -> FfiResult) -> DcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DcStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("panic inside the deconflict library");
            DcStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(DcStatus::NullPointer, format!("`{name}` is NULL")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::new(DcStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::new(DcStatus::NullPointer, format!("`{name}` is NULL")))
}

unsafe fn mut_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::new(DcStatus::NullPointer, format!("`{name}` is NULL")))
}

fn out_string(text: String) -> Result<*mut c_char, Failure> {
    CString::new(text)
        .map(CString::into_raw)
        .map_err(|_| Failure::new(DcStatus::Internal, "output contains a NUL byte"))
}

fn game_failure(e: GameError) -> Failure {
    let status = match e {
        GameError::IllegalAction { .. } | GameError::ClockRewind { .. } => DcStatus::IllegalAction,
        GameError::Finished => DcStatus::Finished,
        GameError::Config(_) => DcStatus::InvalidArgument,
        _ => DcStatus::Internal,
    };
    Failure::new(status, e.to_string())
}

/// The message for the last failed call on this thread; empty after a
/// successful call. Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn dc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn dc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a built-in culture.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_culture_builtin(level: DcLevel, out: *mut *mut DcCulture) -> DcStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        *out = Box::into_raw(Box::new(DcCulture { inner: Culture::builtin(level.into()) }));
        Ok(())
    })
}

/// Parses a culture from its text form.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_culture_parse(source: *const c_char, out: *mut *mut DcCulture) -> DcStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(source, "source")?;
        let culture = parse_culture(text).map_err(|e| Failure::new(DcStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(DcCulture { inner: culture }));
        Ok(())
    })
}

/// # Safety
/// `culture` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn dc_culture_free(culture: *mut DcCulture) {
    if !culture.is_null() {
        drop(Box::from_raw(culture));
    }
}

/// The culture as a JSON document.
///
/// # Safety
/// `culture` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_culture_json(culture: *const DcCulture, out: *mut *mut c_char) -> DcStatus {
    guard(|| {
        let c = ref_arg(culture, "culture")?;
        let out = mut_arg(out, "out")?;
        *out = out_string(c.inner.to_json().to_string())?;
        Ok(())
    })
}

unsafe fn contexts(
    c: &Culture,
    proponent: *const c_char,
    opponent: *const c_char,
) -> Result<(deconflict::culture::AgentContext, deconflict::culture::AgentContext), Failure> {
    let schema = c.schema();
    let parse = |text: &str| schema.parse_context(text).map_err(|e| Failure::new(DcStatus::ParseError, e.to_string()));
    Ok((parse(str_arg(proponent, "proponent")?)?, parse(str_arg(opponent, "opponent")?)?))
}

/// Decides who wins the culture's default motion when `proponent` proposes
/// it against `opponent`. Contexts are written `name=value,...`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dc_culture_decide(
    culture: *const DcCulture,
    proponent: *const c_char,
    opponent: *const c_char,
    winner: *mut DcPlayer,
) -> DcStatus {
    guard(|| {
        let c = &ref_arg(culture, "culture")?.inner;
        let winner = mut_arg(winner, "winner")?;
        let (p, o) = contexts(c, proponent, opponent)?;
        let motion = ArgumentSet::singleton(c.default_motion());
        let w = decide_outcome(c, motion, &p, &o).map_err(|e| Failure::new(DcStatus::Internal, e.to_string()))?;
        *winner = w.into();
        Ok(())
    })
}

/// Plays the dispute optimally and renders an explanation of the outcome
/// for the party `perspective`. `reasons` >= 2 asks for a contrastive
/// explanation; 1 asks for a plain one.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dc_culture_explain(
    culture: *const DcCulture,
    proponent: *const c_char,
    opponent: *const c_char,
    reasons: usize,
    perspective: DcPlayer,
    seed: u64,
    out: *mut *mut c_char,
) -> DcStatus {
    guard(|| {
        let c = &ref_arg(culture, "culture")?.inner;
        let out = mut_arg(out, "out")?;
        *out = ptr::null_mut();
        let (p, o) = contexts(c, proponent, opponent)?;
        let motion = ArgumentSet::singleton(c.default_motion());
        let result = play_dialogue(c, motion, &p, &o, MoveStrategy::optimal(seed))
            .map_err(|e| Failure::new(DcStatus::Internal, e.to_string()))?;
        let kind = if reasons >= 2 { ExplanationKind::Contrastive } else { ExplanationKind::Plain };
        let e = generate_explanation(&result, kind, reasons)
            .map_err(|e| Failure::new(DcStatus::InvalidArgument, e.to_string()))?;
        *out = out_string(render_hint(&e, c, perspective.into(), "the other party"))?;
        Ok(())
    })
}

/// Starts a session on the default map.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_session_new(level: DcLevel, mode: DcMode, seed: u64, out: *mut *mut DcSession) -> DcStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        *out = ptr::null_mut();
        let session = GameSession::new(SessionConfig::new(level.into(), mode.into(), seed)).map_err(game_failure)?;
        *out = Box::into_raw(Box::new(DcSession { inner: session }));
        Ok(())
    })
}

/// # Safety
/// `session` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn dc_session_free(session: *mut DcSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Advances the session by one step at `now_ms` on the caller's clock.
/// If `events_json` is not NULL it receives the step's events as JSON.
///
/// # Safety
/// `session` must be a live handle; `events_json` NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_session_step(
    session: *mut DcSession,
    action: DcAction,
    now_ms: u64,
    events_json: *mut *mut c_char,
) -> DcStatus {
    guard(|| {
        let s = mut_arg(session, "session")?;
        if let Some(out) = events_json.as_mut() {
            *out = ptr::null_mut();
        }
        let events = s.inner.step(action.into(), now_ms).map_err(game_failure)?;
        if let Some(out) = events_json.as_mut() {
            let text = serde_json::to_string(&events).map_err(|e| Failure::new(DcStatus::Internal, e.to_string()))?;
            *out = out_string(text)?;
        }
        Ok(())
    })
}

/// # Safety
/// `session` must be a live handle; `fuel` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_session_fuel(session: *const DcSession, fuel: *mut i64) -> DcStatus {
    guard(|| {
        let s = ref_arg(session, "session")?;
        *mut_arg(fuel, "fuel")? = s.inner.fuel();
        Ok(())
    })
}

/// # Safety
/// `session` must be a live handle; `finished` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_session_is_finished(session: *const DcSession, finished: *mut bool) -> DcStatus {
    guard(|| {
        let s = ref_arg(session, "session")?;
        *mut_arg(finished, "finished")? = s.inner.is_finished();
        Ok(())
    })
}

/// The client-visible state as JSON.
///
/// # Safety
/// `session` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_session_snapshot_json(session: *const DcSession, out: *mut *mut c_char) -> DcStatus {
    guard(|| {
        let s = ref_arg(session, "session")?;
        let out = mut_arg(out, "out")?;
        let text =
            serde_json::to_string(&s.inner.snapshot()).map_err(|e| Failure::new(DcStatus::Internal, e.to_string()))?;
        *out = out_string(text)?;
        Ok(())
    })
}

/// The hash-chained replay log, one JSON record per line.
///
/// # Safety
/// `session` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_session_replay_log(session: *const DcSession, out: *mut *mut c_char) -> DcStatus {
    guard(|| {
        let s = ref_arg(session, "session")?;
        *mut_arg(out, "out")? = out_string(s.inner.replay_log())?;
        Ok(())
    })
}

/// Re-simulates a replay log. Returns [`DcStatus::ReplayInvalid`] if any
/// record was altered. If `summary_json` is not NULL it receives a summary
/// of a valid log.
///
/// # Safety
/// `log` must be NUL-terminated; `summary_json` NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_replay_verify(log: *const c_char, summary_json: *mut *mut c_char) -> DcStatus {
    guard(|| {
        if let Some(out) = summary_json.as_mut() {
            *out = ptr::null_mut();
        }
        let text = str_arg(log, "log")?;
        let summary = verify_replay(text).map_err(|e| Failure::new(DcStatus::ReplayInvalid, e.to_string()))?;
        if let Some(out) = summary_json.as_mut() {
            let text = serde_json::to_string(&summary).map_err(|e| Failure::new(DcStatus::Internal, e.to_string()))?;
            *out = out_string(text)?;
        }
        Ok(())
    })
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn dc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

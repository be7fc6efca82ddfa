//! Topic names and their registered payload kinds.

use super::PayloadKind;
use crate::plant::Link;

pub const GNSS_TOP_FIX: &str = "gnss_top/fix";
pub const GNSS_BOTTOM_FIX: &str = "gnss_bottom/fix";
pub const IMU: &str = "imu";
pub const WHEEL_SPEED: &str = "wheel_speed";
pub const ENGINE_REPORT: &str = "engine_report";
pub const DIAGNOSTICS: &str = "diagnostics";
pub const MYLAPS_FLAGS: &str = "mylaps_flags";
pub const SPOOFED_FLAGS: &str = "spoofed_flags";
pub const JOYSTICK: &str = "joystick";
pub const TELEMETRY: &str = "telemetry";
pub const TOP_CARTESIAN: &str = "top_cartesian";
pub const BOTTOM_CARTESIAN: &str = "bottom_cartesian";
pub const EKF_ODOMETRY: &str = "ekf/odometry";
pub const BEST_ODOMETRY: &str = "best_odometry";
pub const NO_ODOMETRY: &str = "no_odometry";
pub const BEST_FLAGS: &str = "best_flags";
pub const LONG_COMMAND: &str = "long_control/command";
pub const LONG_STATUS: &str = "long_control/status";
pub const STEERING: &str = "path_tracker/steering";
pub const RAPTOR_COMMAND: &str = "raptor/command";
pub const DESIRED_VELOCITY: &str = "desired_velocity";
pub const DESIRED_PATH: &str = "desired_path";
pub const GRACEFUL_STOP_FLAG: &str = "graceful_stop/flag";
pub const STOP_REQUEST: &str = "stop_request";
pub const NHM_BRAKE: &str = "nhm/brake";
pub const ENGINE_SHUTDOWN: &str = "engine_shutdown";
pub const OPERATOR_NOTIFICATION: &str = "operator/notification";
pub const DETECTIONS: &str = "detections";

/// Nodes that publish a rolling-counter heartbeat.
pub const HEARTBEAT_NODES: [&str; 7] = [
    "graceful_stop",
    "lidar",
    "long_control",
    "node_health_monitor",
    "path_tracker",
    "ssc_interface",
    "topic_multiplexer",
];

pub fn heartbeat(node: &str) -> String {
    format!("{node}/heartbeat")
}

/// Every topic of the stack with its payload kind and, for topics carried
/// over a radio, the link they ride on.
pub fn registry() -> Vec<(String, PayloadKind, Option<Link>)> {
    use PayloadKind as K;
    let mut v: Vec<(String, PayloadKind, Option<Link>)> = [
        (GNSS_TOP_FIX, K::Gnss, None),
        (GNSS_BOTTOM_FIX, K::Gnss, None),
        (IMU, K::Imu, None),
        (WHEEL_SPEED, K::WheelSpeed, None),
        (ENGINE_REPORT, K::Engine, None),
        (DIAGNOSTICS, K::Diagnostics, None),
        (MYLAPS_FLAGS, K::Flag, None),
        (SPOOFED_FLAGS, K::Flag, Some(Link::Basestation)),
        (JOYSTICK, K::Joystick, Some(Link::Basestation)),
        (TELEMETRY, K::Telemetry, Some(Link::Basestation)),
        (TOP_CARTESIAN, K::Pose, None),
        (BOTTOM_CARTESIAN, K::Pose, None),
        (EKF_ODOMETRY, K::Pose, None),
        (BEST_ODOMETRY, K::Pose, None),
        (NO_ODOMETRY, K::NoOdometry, None),
        (BEST_FLAGS, K::Flag, None),
        (LONG_COMMAND, K::Command, None),
        (LONG_STATUS, K::ControlStatus, None),
        (STEERING, K::Steering, None),
        (RAPTOR_COMMAND, K::Command, None),
        (DESIRED_VELOCITY, K::DesiredVelocity, None),
        (DESIRED_PATH, K::DesiredPath, None),
        (GRACEFUL_STOP_FLAG, K::StopFlag, None),
        (STOP_REQUEST, K::StopRequest, None),
        (NHM_BRAKE, K::BrakeOverride, None),
        (ENGINE_SHUTDOWN, K::EngineShutdown, None),
        (OPERATOR_NOTIFICATION, K::Notification, Some(Link::Basestation)),
        (DETECTIONS, K::Detection, None),
    ]
    .into_iter()
    .map(|(n, k, l)| (n.to_string(), k, l))
    .collect();
    for node in HEARTBEAT_NODES {
        v.push((heartbeat(node), K::Heartbeat, None));
    }
    v
}

"""Published hook names, field keys and protocol constants shared by host and plugins."""

# Hooks the core host exposes (the dropmark defense attaches to all six).
CIRCPAD_GLOBAL_MACHINE_INIT = "circpad_global_machine_init"
CIRCPAD_SETUP_MACHINE_ON_CIRC = "circpad_setup_machine_on_circ_add"
RELAY_PROCESS_EDGE_UNKNOWN = "relay_process_edge_unknown"
CONNEDGE_SEND_BEGIN = "connedge_connection_ap_handshake_send_begin_add"
CONNEDGE_RECEIVED_CONNECTED = "connedge_received_connected_cell_add"
CIRCPAD_SEND_PADDING_CALLBACK = "circpad_send_padding_cell_for_callback_replace"

CORE_HOOKS = (
    CIRCPAD_GLOBAL_MACHINE_INIT,
    CIRCPAD_SETUP_MACHINE_ON_CIRC,
    RELAY_PROCESS_EDGE_UNKNOWN,
    CONNEDGE_SEND_BEGIN,
    CONNEDGE_RECEIVED_CONNECTED,
    CIRCPAD_SEND_PADDING_CALLBACK,
)

# Stable field-key ids for get()/set(). Hosts may publish more; ids >= 1000.
FIELD_IDS = {
    "RELAY_ARG_CIRCUIT_T": 1,
    "RELAY_ARG_CRYPT_PATH_T": 2,
    "UTIL_CIRCUIT_IS_ORIGIN": 3,
    "RELAY_CIRC_DELIVER_WINDOW": 4,
    "RELAY_LAYER_HINT_DELIVER_WINDOW": 5,
    "RELAY_ARG_SIGNAL_ID": 6,
    "CONNEDGE_ARG_CIRCUIT_T": 7,
    "CIRCPAD_ARG_CIRCUIT_T": 8,
    "CIRCPAD_GLOBAL_MACHINE": 9,
    "CIRCPAD_CIRC_MACHINE": 10,
    "CIRCPAD_EVENT": 11,
    "CIRCPAD_PADDING_SENT": 12,
    "CIRCPAD_PADDING_CAP": 13,
    "RELAY_CONSERVATIVE_POLICY": 14,
    "RELAY_CIRC_PACKAGE_WINDOW": 15,
    "CIRCUIT_ID": 16,
}

# Relay-cell signals carried by UNKNOWN relay cells (the descriptor's param values).
SIGNAL_ACTIVATE = 1
SIGNAL_BE_SILENT = 2

# Verdicts for relay_process_edge_unknown.
EDGE_DROP = 0
EDGE_HANDLED = 1
EDGE_TEARDOWN = 2

MACHINE_DROPMARK_DEF = 1

# Padding-machine event codes accepted by set(CIRCPAD_EVENT, ...).
EVENT_NON_PADDING_SENT = 0
EVENT_PADDING_SENT = 1
EVENT_STATE_LENGTH_ZERO = 2
EVENT_CIRCUIT_CLOSE = 3
EVENT_ACTIVATE = 4
EVENT_BE_SILENT = 5

# Hooks declared by the simulator host in addition to CORE_HOOKS.
CIRCUIT_OPEN = "circuit_open_add"
SENDME_DATA_RECEIVED = "sendme_circuit_data_received_replace"
SENDME_NOTE_DIGEST = "sendme_note_cell_digest_add"
SENDME_PROCESS_CIRCUIT_LEVEL = "sendme_process_circuit_level_add"
CIRCPAD_CIRCUIT_BUILT = "circpad_circuit_built_add"

SIM_HOOKS = (
    CIRCUIT_OPEN,
    SENDME_DATA_RECEIVED,
    SENDME_NOTE_DIGEST,
    SENDME_PROCESS_CIRCUIT_LEVEL,
    CIRCPAD_CIRCUIT_BUILT,
)


def assembler_constants():
    out = dict(FIELD_IDS)
    for name, value in globals().items():
        if name.startswith(("SIGNAL_", "EDGE_", "EVENT_", "MACHINE_")) and isinstance(value, int):
            out[name] = value
    return out

/*
 * monitor_support.h — fixed support surface emitted monitors compile against.
 *
 * Freestanding-compatible: only fixed-width integer and boolean headers.
 * Layout and declarations are versioned; emitted code targets exactly one
 * MON_SUPPORT_VERSION.
 */
#ifndef MONITOR_SUPPORT_H
#define MONITOR_SUPPORT_H

#define MON_SUPPORT_VERSION 1

#include <stdbool.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Direction of travel across the proxied link. */
typedef enum {
    MON_DIR_GCS_TO_UAV = 0,
    MON_DIR_UAV_TO_GCS = 1
} mon_direction_t;

/* Borrowed view of one frame: id plus raw (possibly truncated) payload. */
typedef struct {
    uint32_t msg_id;
    const uint8_t *payload;
    uint16_t len;
} mon_frame_view_t;

/* Classification of one message. */
typedef enum {
    MON_VERDICT_FORWARD_PASS = 0,   /* not protocol-relevant */
    MON_VERDICT_FORWARD_ACCEPT = 1, /* transition taken */
    MON_VERDICT_DROP_VIOLATION = 2
} mon_verdict_t;

/* The concrete struct is defined by each emitted monitor unit. */
typedef struct monitor monitor_t;

/* Stable surface of every emitted monitor. */
monitor_t *monitor_instance(void); /* static single instance */
void monitor_init(monitor_t *mon);
bool monitor_step(monitor_t *mon, mon_direction_t dir, const mon_frame_view_t *frame);
int monitor_state(const monitor_t *mon);
bool monitor_is_terminal(const monitor_t *mon);
bool monitor_is_protocol_message(uint32_t msg_id);

/* Test support: build wire payloads through the schemas the monitor was
 * generated from, so its decoders sit inside every differential test. */
int monitor_test_payload_size(uint32_t msg_id);
int monitor_test_encode_field(uint32_t msg_id, const char *field_name,
                              int64_t value, uint8_t *payload);

#ifdef __cplusplus
}
#endif

#endif /* MONITOR_SUPPORT_H */

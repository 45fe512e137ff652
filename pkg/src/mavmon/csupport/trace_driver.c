/*
 * trace_driver.c — feeds JSON-line traces into a compiled monitor and prints
 * one verdict token per line (PASS / ACCEPT / DROP, RESET on reset lines).
 *
 * Input schema, one object per line, keys in this order:
 *   {"reset": true}
 *   {"dir": 0|1, "msg": <id>, "fields": {"name": <int>, ...}[, "trunc": <len>]}
 *
 * The payload is built through the emitted monitor's own field encoders and
 * then decoded again inside monitor_step, so the generated decoders are part
 * of every differential run.  Field values are 64-bit signed integers.
 *
 * Build (one invocation, from a directory holding the three sources):
 *   cc -std=c99 -Wall -Wextra -Werror -pedantic -O2 \
 *      trace_driver.c <name>_monitor.c -I. -o trace_driver
 *
 * Exit status: 0 on clean EOF, 2 on a malformed input line (line number on
 * stderr).  With --timing, each token is followed by the step's wall time
 * in nanoseconds.  The monitor itself never allocates; this driver touches
 * the heap for nothing but stdio's own line buffering.
 */
#define _POSIX_C_SOURCE 199309L

#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <time.h>

#include "monitor_support.h"

#define LINE_MAX_LEN 65536
#define FIELD_NAME_MAX 64
#define PAYLOAD_MAX 512

static char line_buf[LINE_MAX_LEN];
static uint8_t payload_buf[PAYLOAD_MAX];
static long line_no = 0;

static const char *cur;

static void fail(const char *why)
{
    fprintf(stderr, "line %ld: %s\n", line_no, why);
    exit(2);
}

static void skip_ws(void)
{
    while (*cur == ' ' || *cur == '\t' || *cur == '\r' || *cur == '\n')
        cur++;
}

static void expect(char c)
{
    skip_ws();
    if (*cur != c)
        fail("unexpected character");
    cur++;
}

static int try_consume(char c)
{
    skip_ws();
    if (*cur == c) {
        cur++;
        return 1;
    }
    return 0;
}

/* Parse "name" into out (bounded). */
static void parse_key(char *out, size_t cap)
{
    size_t n = 0;
    expect('"');
    while (*cur && *cur != '"') {
        if (n + 1 >= cap)
            fail("key too long");
        out[n++] = *cur++;
    }
    expect('"');
    out[n] = 0;
}

static int64_t parse_int(void)
{
    char *end;
    long long v;
    skip_ws();
    v = strtoll(cur, &end, 10);
    if (end == cur)
        fail("expected integer");
    cur = end;
    return (int64_t)v;
}

static int key_is(const char *key, const char *want)
{
    return strcmp(key, want) == 0;
}

int main(int argc, char **argv)
{
    int timing = 0;
    monitor_t *mon = monitor_instance();

    if (argc > 1 && strcmp(argv[1], "--timing") == 0)
        timing = 1;
    else if (argc > 1)
        fail("unknown argument");

    monitor_init(mon);

    while (fgets(line_buf, sizeof line_buf, stdin) != NULL) {
        char key[FIELD_NAME_MAX];
        int have_dir = 0, have_msg = 0;
        int64_t dir = 0, msg = 0, trunc = -1;

        line_no++;
        cur = line_buf;
        skip_ws();
        if (*cur == 0)
            continue; /* blank line */
        expect('{');

        parse_key(key, sizeof key);
        if (key_is(key, "reset")) {
            expect(':');
            skip_ws();
            if (strncmp(cur, "true", 4) != 0)
                fail("reset must be true");
            cur += 4;
            expect('}');
            monitor_init(mon);
            puts("RESET");
            continue;
        }

        if (!key_is(key, "dir"))
            fail("expected \"dir\"");
        expect(':');
        dir = parse_int();
        have_dir = 1;
        expect(',');

        parse_key(key, sizeof key);
        if (!key_is(key, "msg"))
            fail("expected \"msg\"");
        expect(':');
        msg = parse_int();
        have_msg = 1;
        expect(',');

        parse_key(key, sizeof key);
        if (!key_is(key, "fields"))
            fail("expected \"fields\"");
        expect(':');
        expect('{');
        memset(payload_buf, 0, sizeof payload_buf);
        if (!try_consume('}')) {
            for (;;) {
                char fname[FIELD_NAME_MAX];
                int64_t value;
                parse_key(fname, sizeof fname);
                expect(':');
                value = parse_int();
                /* unknown fields are ignored, like the wire codec would */
                (void)monitor_test_encode_field((uint32_t)msg, fname, value, payload_buf);
                if (try_consume('}'))
                    break;
                expect(',');
            }
        }
        if (try_consume(',')) {
            parse_key(key, sizeof key);
            if (!key_is(key, "trunc"))
                fail("expected \"trunc\"");
            expect(':');
            trunc = parse_int();
            if (trunc < 0 || trunc > PAYLOAD_MAX)
                fail("trunc out of range");
        }
        expect('}');
        if (!have_dir || !have_msg)
            fail("missing dir/msg");
        if (dir != MON_DIR_GCS_TO_UAV && dir != MON_DIR_UAV_TO_GCS)
            fail("dir must be 0 or 1");

        {
            mon_frame_view_t frame;
            const char *token;
            bool ok;
            long ns = 0;

            frame.msg_id = (uint32_t)msg;
            frame.payload = payload_buf;
            frame.len = (uint16_t)(trunc >= 0 ? trunc : monitor_test_payload_size((uint32_t)msg));

            if (timing) {
                struct timespec t0, t1;
                clock_gettime(CLOCK_MONOTONIC, &t0);
                ok = monitor_step(mon, (mon_direction_t)dir, &frame);
                clock_gettime(CLOCK_MONOTONIC, &t1);
                ns = (t1.tv_sec - t0.tv_sec) * 1000000000L + (t1.tv_nsec - t0.tv_nsec);
            } else {
                ok = monitor_step(mon, (mon_direction_t)dir, &frame);
            }

            if (!monitor_is_protocol_message((uint32_t)msg))
                token = "PASS";
            else
                token = ok ? "ACCEPT" : "DROP";

            if (timing)
                printf("%s %ld\n", token, ns);
            else
                puts(token);
        }
    }

    if (fflush(stdout) != 0)
        return 2;
    return 0;
}

#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "ttj.h"

static char *slurp(const char *path) {
    FILE *f = fopen(path, "rb");
    if (!f) return NULL;
    fseek(f, 0, SEEK_END);
    long n = ftell(f);
    fseek(f, 0, SEEK_SET);
    char *buf = malloc(n + 1);
    if (fread(buf, 1, n, f) != (size_t)n) { fclose(f); free(buf); return NULL; }
    buf[n] = 0;
    fclose(f);
    return buf;
}

static int verdict_of(const TtjCase *tc) {
    TtjReport *report = NULL;
    TtjVerdict v;
    if (ttj_run(tc, false, &report) != TTJ_STATUS_OK) return -1;
    if (ttj_report_verdict(report, &v) != TTJ_STATUS_OK) return -1;
    ttj_report_free(report);
    return (int)v;
}

int main(int argc, char **argv) {
    if (argc != 2) return 10;
    char *json = slurp(argv[1]);
    if (!json) return 11;
    TtjCase *tc = NULL;
    if (ttj_case_from_json(json, &tc) != TTJ_STATUS_OK) {
        fprintf(stderr, "%s\n", ttj_last_error_message());
        return 12;
    }
    free(json);
    if (verdict_of(tc) != TTJ_VERDICT_PASS) return 13;
    ttj_case_set_defects(tc, 1);
    if (verdict_of(tc) != TTJ_VERDICT_MISMATCH) return 14;

    TtjCase *bad = NULL;
    if (ttj_case_from_json("{", &bad) != TTJ_STATUS_INVALID_CASE || bad != NULL) return 15;
    if (strlen(ttj_last_error_message()) == 0) return 16;

    ttj_case_free(tc);
    printf("ok %s\n", ttj_version());
    return 0;
}

/* Inline IEEE successor/predecessor, equivalent to nextafter toward +-inf. */
#ifndef HETPROOF_ROUNDING_H
#define HETPROOF_ROUNDING_H
#include <stdint.h>
#include <string.h>
#include <math.h>

static inline double hp_up(double x) {
    int64_t i;
    if (x != x || x == INFINITY) return x;
    if (x == 0.0) return 4.9406564584124654e-324;
    memcpy(&i, &x, 8);
    i += (i > 0) ? 1 : -1;
    memcpy(&x, &i, 8);
    return x;
}

static inline double hp_dn(double x) {
    return -hp_up(-x);
}
#endif

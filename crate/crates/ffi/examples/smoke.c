#include <assert.h>
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "driftfield.h"

int main(void) {
    assert(strlen(df_version()) > 0);

    double data[36];
    for (int k = 0; k < 36; k++) data[k] = ((k * 7 + 3) % 11) / 11.0 - 0.5;
    DfSchedule schedule = {8, 3.0, 1.0, 0.5, 0.1};
    DfCodebook *cb = NULL;
    DfStatus st = df_codebook_train(6, 4, DF_TOPOLOGY_TOROID, data, 12, 3,
                                    &schedule, DF_INIT_RANDOM, 42, &cb);
    assert(st == DF_STATUS_OK);
    assert(df_codebook_width(cb) == 6 && df_codebook_height(cb) == 4 && df_codebook_dim(cb) == 3);

    size_t col = 99, row = 99;
    st = df_codebook_bmu(cb, data, 3, &col, &row);
    assert(st == DF_STATUS_OK && col < 6 && row < 4);

    double qe = -1.0;
    st = df_codebook_quantization_error(cb, data, 12, 3, &qe);
    assert(st == DF_STATUS_OK && qe >= 0.0);
    df_codebook_free(cb);

    st = df_codebook_train(6, 4, DF_TOPOLOGY_TOROID, NULL, 12, 3, &schedule,
                           DF_INIT_RANDOM, 42, &cb);
    assert(st == DF_STATUS_NULL_ARGUMENT);
    assert(strlen(df_last_error_message()) > 0);

    double weights[4] = {0.0, 1.0, 1.0, 0.0};
    double scores[2];
    st = df_pagerank(weights, 2, 0.85, 1e-12, 10000, scores);
    assert(st == DF_STATUS_OK);
    assert(fabs(scores[0] - 0.5) < 1e-9 && fabs(scores[1] - 0.5) < 1e-9);

    printf("ffi smoke ok\n");
    return 0;
}

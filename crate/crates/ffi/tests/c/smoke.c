#include <stdio.h>
#include <string.h>

#include "topicflow.h"

/* argv: lda.model corpus.tfcorp classifier.tfcls */
int main(int argc, char **argv) {
    if (argc != 4) {
        fprintf(stderr, "usage: smoke LDA CORPUS CLASSIFIER\n");
        return 64;
    }
    TfLda *lda = NULL;
    TfStatus st = tf_lda_load(argv[1], argv[2], &lda);
    if (st != TF_STATUS_OK) {
        fprintf(stderr, "lda load: %d %s\n", st, tf_last_error_message());
        return 1;
    }
    size_t k = 0;
    tf_lda_num_topics(lda, &k);
    double probs[64];
    st = tf_lda_infer(lda, "", probs, k);
    double sum = 0.0;
    for (size_t i = 0; i < k; i++) sum += probs[i];
    printf("topics %zu sum %.6f\n", k, sum);
    tf_lda_free(lda);

    TfClassifier *clf = NULL;
    if (tf_classifier_load(argv[3], &clf) != TF_STATUS_OK) {
        fprintf(stderr, "classifier load: %s\n", tf_last_error_message());
        return 1;
    }
    uint32_t labels[2];
    double p[2];
    st = tf_classifier_predict(clf, "anything at all", 2, labels, p);
    printf("predict %d %u %.3f\n", st, labels[0], p[0] >= p[1] ? 1.0 : 0.0);
    tf_classifier_free(clf);

    st = tf_lda_load("/nonexistent/lda.model", argv[2], &lda);
    printf("missing %d %s\n", st, tf_last_error_message() ? "message" : "none");
    return 0;
}

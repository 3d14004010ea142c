int square(int x) {
    return x * x;
}
int sum_squares(int a, int b) {
    return square(a) + square(b);
}

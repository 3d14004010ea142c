int score(char grade) {
    int s = 0;
    switch (grade) {
        case 'A': s = 4; break;
        case 'B': s = 3; break;
        default: s = 0;
    }
    return s;
}

def pairs(n):
    result = []
    for i in range(n):
        for j in range(i):
            result.append((j, i))
    return result

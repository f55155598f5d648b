bar(1);
